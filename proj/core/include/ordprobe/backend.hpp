#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ordprobe {

/// Sampling parameters for probe generation.
struct GenParams {
  double temperature = 2.0;
  std::size_t max_new_tokens = 128;
  /// Forbid repeating any n-gram of this size within the continuation; 0 = off.
  std::size_t block_ngram = 4;
  std::vector<std::string> stop_sequences;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

/// Scores of a closed label set given one context.
struct LabelQueryResult {
  /// Total log-probability of each label continuation.
  std::vector<double> scores;
  /// softmax(scores): the distribution restricted to the label set.
  std::vector<double> normalized;
};

/// Builds a result from raw per-label log-probabilities.
LabelQueryResult make_label_result(std::vector<double> scores);

/// Max-shifted softmax; terms are summed in index order.
std::vector<double> softmax(std::span<const double> scores);

struct Generation {
  std::string text;
  std::size_t tokens = 0;
};

struct BackendInfo {
  std::string model_id;
  std::size_t context_window = 0;
};

/// Language-model interface. Implementations must be safe to call from
/// several threads at once.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual BackendInfo info() const = 0;

  /// Per-continuation total log-probability given `context`, plus the
  /// renormalised distribution over the continuations.
  virtual LabelQueryResult label_distribution(
      std::string_view context, std::span<const std::string> continuations) = 0;

  /// Samples a continuation of `context`.
  virtual Generation generate(std::string_view context,
                              const GenParams& params) = 0;
};

}  // namespace ordprobe
