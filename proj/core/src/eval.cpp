#include "ordprobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ordprobe/error.hpp"
#include "ordprobe/parallel.hpp"
#include "ordprobe/rng.hpp"
#include "ordprobe/scoring.hpp"

namespace ordprobe {

std::vector<CandidateEval> evaluate_candidates(
    std::span<const PromptCandidate> candidates,
    std::span<const LabeledExample> eval_set, LanguageModel& backend,
    const PromptTemplate& tpl, std::size_t parallelism) {
  if (eval_set.empty()) throw Error(ErrorKind::config, "empty evaluation set");
  const std::size_t n = eval_set.size();
  std::vector<LabelId> predictions(candidates.size() * n);
  parallel_for(predictions.size(), parallelism, [&](std::size_t q) {
    const auto& candidate = candidates[q / n];
    try {
      predictions[q] = predict_label(label_probabilities(
          candidate.context, eval_set[q % n], backend, tpl,
          ProbabilityMode::normalized));
    } catch (const BackendError& e) {
      throw BackendError("candidate " + std::to_string(candidate.index) +
                             ", example '" + eval_set[q % n].id + "': " + e.what(),
                         e.retryable(), e.attempts());
    } catch (const Error& e) {
      throw Error(e.kind(), "candidate " + std::to_string(candidate.index) +
                                ", example '" + eval_set[q % n].id + "': " + e.what());
    }
  });

  std::vector<CandidateEval> out(candidates.size());
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    auto& e = out[m];
    e.predictions.assign(predictions.begin() + static_cast<long>(m * n),
                         predictions.begin() + static_cast<long>((m + 1) * n));
    e.predicted_histogram.assign(tpl.verbalizer.size(), 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ++e.predicted_histogram[e.predictions[i]];
      correct += e.predictions[i] == eval_set[i].label;
    }
    e.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return out;
}

double accuracy(const PromptCandidate& candidate,
                std::span<const LabeledExample> eval_set, LanguageModel& backend,
                const PromptTemplate& tpl, std::size_t parallelism) {
  return evaluate_candidates(std::span(&candidate, 1), eval_set, backend, tpl,
                             parallelism)
      .front()
      .accuracy;
}

double majority_baseline(std::span<const LabeledExample> eval_set) {
  if (eval_set.empty()) throw Error(ErrorKind::config, "empty evaluation set");
  LabelId max_label = 0;
  for (const auto& e : eval_set) max_label = std::max(max_label, e.label);
  const auto counts = label_counts(eval_set, max_label + 1);
  const auto best = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(best) / static_cast<double>(eval_set.size());
}

std::vector<std::size_t> oracle_select(std::span<const double> accuracies,
                                       std::size_t k) {
  if (k == 0) throw Error(ErrorKind::config, "top-k needs k >= 1");
  return top_k(accuracies, k);
}

std::vector<std::size_t> oracle_select(std::span<const PromptCandidate> candidates,
                                       std::span<const LabeledExample> validation,
                                       LanguageModel& backend,
                                       const PromptTemplate& tpl, std::size_t k,
                                       std::size_t parallelism) {
  const auto evals =
      evaluate_candidates(candidates, validation, backend, tpl, parallelism);
  std::vector<double> acc;
  for (const auto& e : evals) acc.push_back(e.accuracy);
  auto picked = oracle_select(acc, k);
  for (auto& p : picked) p = candidates[p].index;
  return picked;
}

SplitSelection split_train_select(const TrainSet& ts, const PromptTemplate& tpl,
                                  LanguageModel& backend, std::size_t k,
                                  const std::vector<std::string>& label_names,
                                  std::size_t max_permutations,
                                  std::size_t parallelism) {
  if (ts.shots() < 2) {
    throw Error(ErrorKind::config, "split-train selection needs at least 2 samples");
  }
  std::vector<std::size_t> order(ts.shots());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(ts.seed, "split_train"));
  rng.shuffle(std::span(order));

  SplitSelection out;
  out.prompt_samples.seed = ts.seed;
  const std::size_t half = ts.shots() / 2;
  for (std::size_t i = 0; i < ts.shots(); ++i) {
    const auto& sample = ts.samples[order[i]];
    if (i < half) {
      out.prompt_samples.samples.push_back(sample);
    } else {
      out.validation.push_back(sample);
    }
  }
  const auto orderings =
      enumerate_orderings(half, max_permutations, derive_seed(ts.seed, "split_orderings"));
  out.candidates = render_candidates(out.prompt_samples, tpl, orderings, label_names);
  for (const auto& e : evaluate_candidates(out.candidates, out.validation, backend,
                                           tpl, parallelism)) {
    out.validation_accuracy.push_back(e.accuracy);
  }
  out.selected = oracle_select(out.validation_accuracy, k);
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j share the mean of ranks i+1..j+1.
    const double rank = (static_cast<double>(i + j) + 2.0) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::data, "spearman: lists differ in length (" +
                                     std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw Error(ErrorKind::data, "spearman needs >= 2 entries");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

std::vector<std::vector<double>> correlation_matrix(
    std::span<const std::vector<double>> rows) {
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m[i][j] = m[j][i] = spearman(rows[i], rows[j]);
    }
  }
  return m;
}

std::vector<SweepPoint> topk_sweep(std::span<const double> metric_values,
                                   std::span<const double> accuracies) {
  if (metric_values.size() != accuracies.size()) {
    throw Error(ErrorKind::data, "sweep: metric and accuracy lists differ in length");
  }
  const auto order = top_k(metric_values, metric_values.size());
  std::vector<SweepPoint> out;
  double sum = 0.0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    sum += accuracies[order[k - 1]];
    out.push_back(SweepPoint{k, sum / static_cast<double>(k)});
  }
  return out;
}

std::vector<SweepPoint> topk_sweep(
    std::span<const std::vector<double>> metric_values_per_set,
    std::span<const std::vector<double>> accuracies_per_set) {
  if (metric_values_per_set.size() != accuracies_per_set.size() ||
      metric_values_per_set.empty()) {
    throw Error(ErrorKind::data, "sweep: need matching, non-empty per-set lists");
  }
  std::vector<SweepPoint> out;
  for (std::size_t s = 0; s < metric_values_per_set.size(); ++s) {
    const auto curve = topk_sweep(metric_values_per_set[s], accuracies_per_set[s]);
    if (s == 0) {
      out = curve;
    } else if (curve.size() != out.size()) {
      throw Error(ErrorKind::data, "sweep: train sets have different candidate counts");
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) out[k].mean_accuracy += curve[k].mean_accuracy;
    }
  }
  for (auto& p : out) p.mean_accuracy /= static_cast<double>(metric_values_per_set.size());
  return out;
}

MeanStd run_statistics(std::span<const double> per_set_values, StdKind kind) {
  if (per_set_values.empty()) {
    throw Error(ErrorKind::config, "statistics need at least one train set");
  }
  const double n = static_cast<double>(per_set_values.size());
  double mean = 0.0;
  for (double v : per_set_values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : per_set_values) ss += (v - mean) * (v - mean);
  const double denom = kind == StdKind::sample ? n - 1.0 : n;
  return MeanStd{mean, denom > 0.0 ? std::sqrt(ss / denom) : 0.0};
}

double mean_of(std::span<const double> values,
               std::span<const std::size_t> positions) {
  if (positions.empty()) throw Error(ErrorKind::config, "mean of an empty selection");
  double sum = 0.0;
  for (auto p : positions) sum += values[p];
  return sum / static_cast<double>(positions.size());
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::all: return "all";
    case Strategy::local_entropy: return "localE";
    case Strategy::global_entropy: return "globalE";
    case Strategy::oracle: return "oracle";
    case Strategy::split: return "split";
    case Strategy::majority: return "majority";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : all_strategies()) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> order = {
      Strategy::majority, Strategy::all,    Strategy::local_entropy,
      Strategy::global_entropy, Strategy::oracle, Strategy::split};
  return order;
}

}  // namespace ordprobe
