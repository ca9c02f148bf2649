#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "ordprobe/backend.hpp"

namespace ordprobe {

enum class CacheMode {
  /// Hits are served from disk; misses call the wrapped backend and are stored.
  record,
  /// Hits only; a miss is Error(fixture_incomplete). No backend is needed.
  replay,
};

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Content-addressed cache in front of a language model.
///
/// Each request is keyed by the SHA-256 of a canonical JSON document holding
/// the model id, the operation name and every input (context, continuations or
/// generation parameters). An entry is the file `<dir>/<key>.json` containing
/// {"request", "response", "model_id", "timestamp"}. Entries are written to a
/// temporary file and renamed into place, so concurrent readers never see a
/// partial entry. Unreadable entries count as misses (with a warning).
class CachingBackend : public LanguageModel {
 public:
  /// `inner` may be null in replay mode.
  CachingBackend(std::shared_ptr<LanguageModel> inner, BackendInfo info,
                 std::filesystem::path dir, CacheMode mode);

  BackendInfo info() const override { return info_; }
  LabelQueryResult label_distribution(
      std::string_view context,
      std::span<const std::string> continuations) override;
  Generation generate(std::string_view context,
                      const GenParams& params) override;

  struct Stats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t backend_calls = 0;
    std::size_t corrupt = 0;
  };
  Stats stats() const;

  /// Canonical request documents (also the hashed key material).
  static std::string label_request(std::string_view model_id,
                                   std::string_view context,
                                   std::span<const std::string> continuations);
  static std::string generation_request(std::string_view model_id,
                                        std::string_view context,
                                        const GenParams& params);

 private:
  std::optional<std::string> load(const std::string& key,
                                  const std::string& request);
  void store(const std::string& key, const std::string& request,
             const std::string& response);
  LanguageModel& backend(const std::string& request);

  std::shared_ptr<LanguageModel> inner_;
  BackendInfo info_;
  std::filesystem::path dir_;
  CacheMode mode_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> corrupt_{0};
};

}  // namespace ordprobe
