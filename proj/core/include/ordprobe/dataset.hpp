#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ordprobe {

/// Dense label id indexing Dataset::label_names.
using LabelId = std::size_t;

/// One classification instance: a sentence (or a premise/hypothesis pair) and
/// its gold label.
struct LabeledExample {
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;
  LabelId label = 0;

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<LabeledExample> examples;
  std::vector<std::string> label_names;
  bool pair_task = false;

  std::size_t num_labels() const noexcept { return label_names.size(); }
  std::size_t size() const noexcept { return examples.size(); }
};

enum class DataFormat { jsonl, csv };

/// Guesses the format from the file extension (.csv, otherwise jsonl).
DataFormat format_from_path(const std::filesystem::path& path);
std::optional<DataFormat> parse_data_format(std::string_view name);

struct LoadOptions {
  /// Dataset name; defaults to the file stem.
  std::string name;
  /// Fixed label order. When absent, labels are the sorted distinct label
  /// strings of the file (numerically sorted if all labels are integers).
  std::optional<std::vector<std::string>> label_names;
};

/// Reads a JSONL or CSV dataset. Rows are
///   {"id": ..., "text": ..., "label": ...}            single-sentence tasks
///   {"id": ..., "premise": ..., "hypothesis": ..., "label": ...}   pair tasks
/// (CSV: the same names as header columns). Example order equals file order.
/// Throws Error(data) naming the offending line.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const LoadOptions& options = {});
Dataset parse_dataset(std::istream& in, DataFormat format,
                      const LoadOptions& options);

/// A fixed few-shot training set drawn from one dataset.
struct TrainSet {
  std::vector<LabeledExample> samples;
  std::uint64_t seed = 0;

  std::size_t shots() const noexcept { return samples.size(); }
};

/// Draws `shots` examples without replacement. With `balanced`, per-label
/// quotas differ by at most one; remainder slots go to the most frequent
/// labels of the dataset (ties in seeded order). Pure in (d, shots, seed).
TrainSet sample_train_set(const Dataset& d, std::size_t shots,
                          std::uint64_t seed, bool balanced);

/// min(n, |d|) distinct examples drawn uniformly, returned in dataset order.
std::vector<LabeledExample> subsample_eval(const Dataset& d, std::size_t n,
                                           std::uint64_t seed);

std::vector<std::size_t> label_counts(std::span<const LabeledExample> examples,
                                      std::size_t num_labels);

/// Experiment protocol knobs.
struct RunConfig {
  std::size_t shots = 4;
  std::size_t num_train_sets = 5;
  std::size_t max_permutations = 24;
  std::size_t top_k = 4;
  std::size_t eval_subsample = 256;
  std::uint64_t seed = 0;
  /// Explicit train-set seeds; when empty, seeds are derived from `seed`.
  std::vector<std::uint64_t> train_seeds;
  bool balanced = true;

  void validate() const;
  std::uint64_t train_seed(std::size_t set_index) const;
};

/// Shots that fit a 1024-token window: 1 for DBPedia, 2 for AGNews, else 4.
std::size_t default_shots(std::string_view dataset_name);

}  // namespace ordprobe
