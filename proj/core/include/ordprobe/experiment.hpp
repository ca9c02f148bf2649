#pragma once

// End-to-end experiment: configuration, selection and evaluation runs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/cache.hpp"
#include "ordprobe/dataset.hpp"
#include "ordprobe/eval.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/probing.hpp"
#include "ordprobe/scoring.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

struct DatasetSpec {
  std::filesystem::path path;
  std::optional<DataFormat> format;
  std::string name;
  std::optional<std::vector<std::string>> label_names;
};

enum class BackendType { mock, openai };

struct MockSpec {
  std::uint64_t seed = 0;
  /// Keywords per label name.
  std::map<std::string, std::vector<std::string>> keywords;
  double keyword_weight = 1.0;
  double context_keyword_weight = 0.0;
  double recency_bias = 0.0;
  double recency_decay = 0.5;
  double noise = 1e-3;
  /// Generation corpus; defaults to the training dataset.
  std::optional<std::filesystem::path> corpus;
  std::size_t samples_per_generation = 2;
  std::string trailing_text;
};

struct BackendSpec {
  BackendType type = BackendType::mock;
  std::string model = "mock-lm";
  std::string endpoint = "http://127.0.0.1:8000/v1";
  /// Environment variable holding the bearer token.
  std::string api_key_env = "ORDPROBE_API_KEY";
  std::size_t context_window = 1024;
  std::size_t parallelism = 1;
  double chars_per_token = 4.0;
  std::string ngram_block_field = "no_repeat_ngram_size";
  int max_attempts = 3;
  int timeout_seconds = 120;
  MockSpec mock;
};

enum class CacheSetting { live, record, replay };

enum class OracleValidation {
  /// Oracle ranks candidates on the evaluation subsample itself.
  same,
  /// Oracle ranks on a separate subsample disjoint from the evaluation one.
  disjoint,
};

struct ExperimentSpec {
  DatasetSpec dataset;
  std::optional<DatasetSpec> eval_dataset;
  /// Template before binding to the dataset's labels.
  PromptTemplate tpl;
  BackendSpec backend;
  RunConfig run;
  std::size_t generations_per_candidate = 1;
  StdKind std_kind = StdKind::population;
  ProbabilityMode probabilities = ProbabilityMode::normalized;
  OracleValidation oracle_validation = OracleValidation::same;
  std::size_t oracle_validation_size = 256;
  GenParams generation;
  std::optional<std::filesystem::path> cache_dir;
  CacheSetting cache_mode = CacheSetting::live;
  std::filesystem::path output_dir = "out";
  /// Directory relative paths are resolved against.
  std::filesystem::path base_dir = ".";

  std::size_t num_train_sets() const;
  void validate() const;
  /// Canonical JSON of every setting that affects results (cache mode,
  /// output directory and parallelism excluded).
  std::string canonical_json() const;
  /// SHA-256 of canonical_json().
  std::string config_hash() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Parses a JSON experiment config; see docs/config.md.
ExperimentSpec parse_experiment(std::string_view json_text,
                                const std::filesystem::path& base_dir = ".");
ExperimentSpec load_experiment(const std::filesystem::path& config_path);

Dataset load_dataset(const DatasetSpec& spec, const std::filesystem::path& base_dir,
                     const std::optional<std::vector<std::string>>& label_names = {});

/// Loaded data, bound template and backend for one run.
struct Experiment {
  ExperimentSpec spec;
  /// Training pool (examples colliding with template markers removed).
  Dataset dataset;
  std::vector<LabeledExample> eval_set;
  /// Empty when the oracle uses `eval_set`.
  std::vector<LabeledExample> oracle_validation;
  PromptTemplate tpl;
  std::shared_ptr<LanguageModel> backend;
  /// Non-null when requests go through the on-disk cache.
  std::shared_ptr<CachingBackend> cache;
  std::string config_hash;
};

/// Loads data, binds the template and assembles the backend stack.
Experiment open_experiment(const ExperimentSpec& spec);

/// Draws the evaluation (and oracle validation) subsamples into `e`.
void draw_eval_sets(Experiment& e, const Dataset& eval_pool);

TrainSet make_train_set(const Experiment& e, std::size_t set_index);
std::vector<PromptCandidate> make_candidates(const Experiment& e,
                                             const TrainSet& ts);

struct TrainSetSelection {
  std::size_t set_index = 0;
  TrainSet train_set;
  std::vector<PromptCandidate> candidates;
  ProbingSet probing;
  std::vector<CandidateScore> scores;
  std::vector<std::size_t> selected_global;
  std::vector<std::size_t> selected_local;
};

/// Probing, scoring and top-k selection for every train set.
std::vector<TrainSetSelection> run_select(const Experiment& e);

struct CandidateRecord {
  std::size_t index = 0;
  Ordering ordering;
  std::string label_pattern;
  std::optional<double> global_entropy;
  std::optional<double> local_entropy;
  double accuracy = 0.0;
  std::vector<std::size_t> predicted_histogram;
  /// Oracle ranking accuracy when it differs from `accuracy`.
  std::optional<double> validation_accuracy;
};

struct SplitRecord {
  std::vector<std::string> prompt_ids;
  std::vector<std::string> validation_ids;
  std::vector<Ordering> selected_orderings;
  std::vector<double> selected_accuracy;
};

struct TrainSetReport {
  std::size_t set_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> sample_ids;
  std::vector<CandidateRecord> candidates;
  std::map<Strategy, std::vector<std::size_t>> selected;
  std::optional<SplitRecord> split;
  std::map<Strategy, double> strategy_accuracy;
};

struct RunReport {
  std::string config_hash;
  std::string model_id;
  std::string dataset;
  std::string template_id;
  std::vector<std::string> label_names;
  std::size_t eval_size = 0;
  StdKind std_kind = StdKind::population;
  std::vector<Strategy> strategies;
  std::vector<TrainSetReport> sets;
  std::map<Strategy, MeanStd> summary;
  std::vector<SweepPoint> sweep_global;
  std::vector<SweepPoint> sweep_local;
};

/// Evaluates every candidate on the evaluation subsample and aggregates the
/// requested strategies. Entropy strategies need `selections`; candidates are
/// re-rendered from the train-set seeds otherwise.
RunReport run_evaluate(const Experiment& e,
                       std::span<const TrainSetSelection> selections,
                       std::span<const Strategy> strategies);

/// Spearman matrix over reports built from identical candidate sets. Rows
/// are per-candidate accuracies, or per-label-pattern mean accuracies when
/// `by_pattern`. Throws Error(data) on mismatched candidate sets.
std::vector<std::vector<double>> correlate_reports(std::span<const RunReport> reports,
                                                   bool by_pattern);

}  // namespace ordprobe
