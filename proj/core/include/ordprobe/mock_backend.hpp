#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/dataset.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

/// Deterministic stand-in for a language model.
///
/// Tokens are whitespace-delimited words carrying their leading whitespace,
/// so concatenating the tokens of a text reproduces it exactly.
///
/// Label scoring. The context is split at the end of the last demonstration
/// label (an occurrence of `label_prefix + continuation`); what follows is the
/// query. For label v the raw score is
///
///   keyword_weight         * #(query words in keywords[v])
/// + context_keyword_weight * #(demonstration words in keywords[v])
/// + recency_bias * sum over demonstrations labelled v of recency_decay^r
/// + noise * (2u - 1)
///
/// where r = 0 for the most recent demonstration and u in [0, 1) is a hash of
/// (seed, context, v). Reported log-probabilities are
/// raw - logsumexp(raw) - ln 2, i.e. half the mass lies outside the label set.
///
/// Generation. A seeded draw of `samples_per_generation` corpus examples is
/// rendered with `sample_template` and joined by its separator, followed by
/// `trailing_text`. The seed hashes the context, the temperature, the request
/// seed and the model seed. Stop sequences, n-gram blocking and the token cap
/// are then applied token by token.
struct MockConfig {
  std::string model_id = "mock-lm";
  std::size_t context_window = std::size_t{1} << 20;
  std::uint64_t seed = 0;

  std::vector<std::vector<std::string>> keywords;
  double keyword_weight = 1.0;
  double context_keyword_weight = 0.0;
  double recency_bias = 0.0;
  double recency_decay = 0.5;
  double noise = 1e-3;

  std::optional<PromptTemplate> sample_template;
  std::vector<LabeledExample> corpus;
  std::size_t samples_per_generation = 2;
  std::string trailing_text;
};

class MockBackend : public LanguageModel {
 public:
  explicit MockBackend(MockConfig config);

  BackendInfo info() const override;
  LabelQueryResult label_distribution(
      std::string_view context,
      std::span<const std::string> continuations) override;
  Generation generate(std::string_view context,
                      const GenParams& params) override;

  /// Raw scores before the log-normalisation described above.
  std::vector<double> raw_scores(std::string_view context,
                                 std::span<const std::string> continuations) const;

  const MockConfig& config() const noexcept { return config_; }

 private:
  MockConfig config_;
};

/// Whitespace-attached word tokens; concatenation is the identity.
std::vector<std::string> mock_tokenize(std::string_view text);

}  // namespace ordprobe
