#include "ordprobe/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ordprobe/error.hpp"
#include "ordprobe/parallel.hpp"

namespace ordprobe {
namespace {

// Rethrows with the failing query named, preserving the error kind.
[[noreturn]] void rethrow_with(const std::string& where) {
  try {
    throw;
  } catch (const BackendError& e) {
    throw BackendError(where + ": " + e.what(), e.retryable(), e.attempts());
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

}  // namespace

const char* to_string(Metric metric) {
  return metric == Metric::global_entropy ? "globalE" : "localE";
}

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "globalE" || name == "global") return Metric::global_entropy;
  if (name == "localE" || name == "local") return Metric::local_entropy;
  return std::nullopt;
}

double metric_value(const CandidateScore& score, Metric metric) {
  return metric == Metric::global_entropy ? score.global_entropy
                                          : score.local_entropy;
}

LabelId predict_label(std::span<const double> probabilities) {
  if (probabilities.empty()) {
    throw Error(ErrorKind::config, "predict_label on an empty distribution");
  }
  LabelId best = 0;
  for (LabelId v = 1; v < probabilities.size(); ++v) {
    if (probabilities[v] > probabilities[best]) best = v;
  }
  return best;
}

double entropy(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double global_entropy(std::span<const std::size_t> histogram) {
  const std::size_t total =
      std::accumulate(histogram.begin(), histogram.end(), std::size_t{0});
  if (total == 0) throw Error(ErrorKind::config, "GlobalE over an empty probing set");
  double h = 0.0;
  for (std::size_t count : histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double local_entropy(std::span<const std::vector<double>> distributions) {
  if (distributions.empty()) {
    throw Error(ErrorKind::config, "LocalE over an empty probing set");
  }
  double sum = 0.0;
  for (const auto& d : distributions) sum += entropy(d);
  return sum / static_cast<double>(distributions.size());
}

std::string query_context(std::string_view context, const LabeledExample& x,
                          const PromptTemplate& tpl) {
  std::string out(context);
  out += tpl.sample_separator;
  out += linearize(x, false, tpl);
  return out;
}

std::vector<double> label_probabilities(std::string_view context,
                                        const LabeledExample& x,
                                        LanguageModel& backend,
                                        const PromptTemplate& tpl,
                                        ProbabilityMode mode) {
  const auto continuations = tpl.continuations();
  auto result = backend.label_distribution(query_context(context, x, tpl),
                                           continuations);
  if (result.normalized.size() != continuations.size()) {
    throw Error(ErrorKind::backend, "backend returned " +
                                        std::to_string(result.normalized.size()) +
                                        " label scores for " +
                                        std::to_string(continuations.size()) +
                                        " labels");
  }
  if (mode == ProbabilityMode::normalized) return std::move(result.normalized);
  std::vector<double> p(result.scores.size());
  for (std::size_t v = 0; v < p.size(); ++v) p[v] = std::exp(result.scores[v]);
  return p;
}

LabelId predict_label(std::string_view context, const Probe& probe,
                      LanguageModel& backend, const PromptTemplate& tpl) {
  return predict_label(label_probabilities(context, probe_example(probe), backend,
                                           tpl, ProbabilityMode::normalized));
}

std::vector<CandidateScore> score_candidates(
    std::span<const PromptCandidate> candidates, const ProbingSet& probes,
    LanguageModel& backend, const PromptTemplate& tpl,
    const ScoringOptions& options) {
  if (probes.size() == 0) {
    throw Error(ErrorKind::empty_probing_set, "cannot score on an empty probing set");
  }
  const std::size_t n_probes = probes.size();
  const std::size_t num_labels = tpl.verbalizer.size();
  std::vector<LabeledExample> queries;
  queries.reserve(n_probes);
  for (const auto& p : probes.probes) queries.push_back(probe_example(p));

  std::vector<std::vector<double>> dist(candidates.size() * n_probes);
  parallel_for(dist.size(), options.parallelism, [&](std::size_t q) {
    const auto& candidate = candidates[q / n_probes];
    try {
      dist[q] = label_probabilities(candidate.context, queries[q % n_probes],
                                    backend, tpl, options.probabilities);
    } catch (const Error&) {
      rethrow_with("candidate " + std::to_string(candidate.index) + ", probe " +
                   std::to_string(q % n_probes));
    }
  });

  std::vector<CandidateScore> out;
  out.reserve(candidates.size());
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    std::span<const std::vector<double>> rows(dist.data() + m * n_probes, n_probes);
    CandidateScore s;
    s.candidate_index = candidates[m].index;
    s.histogram.assign(num_labels, 0);
    for (const auto& row : rows) ++s.histogram[predict_label(row)];
    s.global_entropy = global_entropy(s.histogram);
    s.local_entropy = local_entropy(rows);
    out.push_back(std::move(s));
  }
  return out;
}

CandidateScore score_candidate(const PromptCandidate& candidate,
                               const ProbingSet& probes, LanguageModel& backend,
                               const PromptTemplate& tpl,
                               const ScoringOptions& options) {
  return score_candidates(std::span(&candidate, 1), probes, backend, tpl,
                          options)
      .front();
}

std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

std::vector<std::size_t> rank_candidates(std::span<const CandidateScore> scores,
                                         Metric metric, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::config, "top-k needs k >= 1");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = metric_value(scores[a], metric);
    const double vb = metric_value(scores[b], metric);
    if (va != vb) return va > vb;
    return scores[a].candidate_index < scores[b].candidate_index;
  });
  order.resize(std::min(k, order.size()));
  for (auto& i : order) i = scores[i].candidate_index;
  return order;
}

}  // namespace ordprobe
