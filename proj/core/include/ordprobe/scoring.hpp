#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/probing.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

enum class Metric { global_entropy, local_entropy };

const char* to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

enum class ProbabilityMode {
  /// Label probabilities renormalised over the label set (default).
  normalized,
  /// exp(total log-probability) of each continuation, without renormalising.
  raw,
};

/// Entropy statistics of one candidate over a probing set (nats).
struct CandidateScore {
  std::size_t candidate_index = 0;
  double global_entropy = 0.0;
  double local_entropy = 0.0;
  /// Predicted-label counts over the probing set.
  std::vector<std::size_t> histogram;
};

double metric_value(const CandidateScore& score, Metric metric);

/// argmax with ties broken towards the lowest label id.
LabelId predict_label(std::span<const double> probabilities);

/// Shannon entropy in nats with 0 ln 0 = 0.
double entropy(std::span<const double> distribution);

/// Entropy of the predicted-label frequencies.
double global_entropy(std::span<const std::size_t> histogram);

/// Mean per-probe entropy.
double local_entropy(std::span<const std::vector<double>> distributions);

/// c ⊕ T(x): the candidate context, the separator, then the unlabeled sample.
std::string query_context(std::string_view context, const LabeledExample& x,
                          const PromptTemplate& tpl);

struct ScoringOptions {
  std::size_t parallelism = 1;
  ProbabilityMode probabilities = ProbabilityMode::normalized;
};

/// Probabilities of one (context, example) query under the chosen mode.
std::vector<double> label_probabilities(std::string_view context,
                                        const LabeledExample& x,
                                        LanguageModel& backend,
                                        const PromptTemplate& tpl,
                                        ProbabilityMode mode);

LabelId predict_label(std::string_view context, const Probe& probe,
                      LanguageModel& backend, const PromptTemplate& tpl);

/// One backend query per (candidate, probe) feeds both metrics.
std::vector<CandidateScore> score_candidates(
    std::span<const PromptCandidate> candidates, const ProbingSet& probes,
    LanguageModel& backend, const PromptTemplate& tpl,
    const ScoringOptions& options = {});

CandidateScore score_candidate(const PromptCandidate& candidate,
                               const ProbingSet& probes, LanguageModel& backend,
                               const PromptTemplate& tpl,
                               const ScoringOptions& options = {});

/// Positions of the min(k, n) largest values, descending, ties by position.
std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k);

/// Candidate indices of the top-k scores under `metric` (highest entropy
/// first, ties by ascending candidate index).
std::vector<std::size_t> rank_candidates(std::span<const CandidateScore> scores,
                                         Metric metric, std::size_t k);

}  // namespace ordprobe
