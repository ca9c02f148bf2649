#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/dataset.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

/// Predictions of one candidate prompt on an evaluation set.
struct CandidateEval {
  double accuracy = 0.0;
  std::vector<LabelId> predictions;
  std::vector<std::size_t> predicted_histogram;
};

/// Evaluates every candidate on every example; queries run in parallel and
/// are aggregated in index order.
std::vector<CandidateEval> evaluate_candidates(
    std::span<const PromptCandidate> candidates,
    std::span<const LabeledExample> eval_set, LanguageModel& backend,
    const PromptTemplate& tpl, std::size_t parallelism = 1);

/// Fraction of `eval_set` whose predicted label equals the gold label.
double accuracy(const PromptCandidate& candidate,
                std::span<const LabeledExample> eval_set, LanguageModel& backend,
                const PromptTemplate& tpl, std::size_t parallelism = 1);

/// Accuracy of always predicting the most frequent label of `eval_set`.
double majority_baseline(std::span<const LabeledExample> eval_set);

/// Positions of the k most accurate candidates (ties by lower position).
std::vector<std::size_t> oracle_select(std::span<const double> accuracies,
                                       std::size_t k);

/// Candidate indices of the k best candidates by accuracy on `validation`.
std::vector<std::size_t> oracle_select(std::span<const PromptCandidate> candidates,
                                       std::span<const LabeledExample> validation,
                                       LanguageModel& backend,
                                       const PromptTemplate& tpl, std::size_t k,
                                       std::size_t parallelism = 1);

/// Selection that tunes on half of the few-shot samples.
struct SplitSelection {
  TrainSet prompt_samples;
  std::vector<LabeledExample> validation;
  std::vector<PromptCandidate> candidates;
  std::vector<double> validation_accuracy;
  /// Indices into `candidates`, best first.
  std::vector<std::size_t> selected;
};

/// Splits the train set by a seeded shuffle: the first floor(n/2) samples are
/// permuted into candidates, the rest are a mini validation set; the top-k
/// orderings by validation accuracy are selected. Needs n >= 2.
SplitSelection split_train_select(const TrainSet& ts, const PromptTemplate& tpl,
                                  LanguageModel& backend, std::size_t k,
                                  const std::vector<std::string>& label_names,
                                  std::size_t max_permutations = 24,
                                  std::size_t parallelism = 1);

/// Ranks starting at 1, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman's rho: Pearson correlation of average ranks. NaN when either
/// list is constant. Throws on length mismatch or fewer than two entries.
double spearman(std::span<const double> a, std::span<const double> b);

/// Pairwise Spearman over rows (one row per model); unit diagonal.
std::vector<std::vector<double>> correlation_matrix(
    std::span<const std::vector<double>> rows);

struct SweepPoint {
  std::size_t k = 0;
  double mean_accuracy = 0.0;
};

/// Mean accuracy of the top-K candidates by `metric_values` for K = 1..n.
std::vector<SweepPoint> topk_sweep(std::span<const double> metric_values,
                                   std::span<const double> accuracies);

/// Per-K average over train sets of the single-set sweep.
std::vector<SweepPoint> topk_sweep(
    std::span<const std::vector<double>> metric_values_per_set,
    std::span<const std::vector<double>> accuracies_per_set);

enum class StdKind { population, sample };

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and standard deviation over per-train-set values.
MeanStd run_statistics(std::span<const double> per_set_values,
                       StdKind kind = StdKind::population);

/// Mean of values[i] over the given positions.
double mean_of(std::span<const double> values,
               std::span<const std::size_t> positions);

enum class Strategy { all, local_entropy, global_entropy, oracle, split, majority };

const char* to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
/// Row order of the results table.
const std::vector<Strategy>& all_strategies();

}  // namespace ordprobe
