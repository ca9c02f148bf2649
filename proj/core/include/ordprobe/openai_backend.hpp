#pragma once

#include <atomic>
#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobe/backend.hpp"

namespace ordprobe {

/// Client for an OpenAI-compatible `/completions` endpoint (vLLM, llama.cpp
/// server, text-generation servers, the legacy OpenAI API). Wire formats are
/// documented in docs/protocol.md.
struct OpenAIConfig {
  /// Endpoint root; requests go to `<base_url>/completions`.
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model;
  /// Sent as "Authorization: Bearer <api_key>" when non-empty.
  std::string api_key;
  std::size_t context_window = 1024;
  /// Token estimate used for the context-window pre-check.
  double chars_per_token = 4.0;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  /// Request field carrying GenParams::block_ngram; empty to omit it.
  std::string ngram_block_field = "no_repeat_ngram_size";
};

namespace wire {

/// Number of Unicode code points in a UTF-8 string (text_offset unit).
std::size_t utf8_length(std::string_view text);

std::string scoring_request(std::string_view model, std::string_view context,
                            std::span<const std::string> continuations);

/// Sums the echoed log-probabilities of the tokens overlapping each
/// continuation. Choices are matched to continuations by their "index".
std::vector<double> parse_scoring_response(
    std::string_view body, std::string_view context,
    std::span<const std::string> continuations);

std::string generation_request(std::string_view model, std::string_view context,
                               const GenParams& params,
                               std::string_view ngram_block_field);

Generation parse_generation_response(std::string_view body);

}  // namespace wire

class OpenAICompletionsBackend : public LanguageModel {
 public:
  explicit OpenAICompletionsBackend(OpenAIConfig config);

  BackendInfo info() const override;
  LabelQueryResult label_distribution(
      std::string_view context,
      std::span<const std::string> continuations) override;
  Generation generate(std::string_view context,
                      const GenParams& params) override;

  /// HTTP requests issued so far, retries included.
  std::size_t requests_sent() const noexcept { return requests_.load(); }

 private:
  std::string post(const std::string& body);
  std::size_t estimate_tokens(std::string_view text) const;

  OpenAIConfig config_;
  std::string host_;
  std::string path_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace ordprobe
