#pragma once

// On-disk artifacts of select/evaluate runs. Formats are described in
// docs/formats.md. Every file records the config hash of the run that wrote
// it, and writes go through a temporary file plus rename.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobe/experiment.hpp"

namespace ordprobe {

/// Shortest decimal form that parses back to the same double; "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_double(double v);

void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// An output directory guarded by manifest.json. Opening a directory whose
/// manifest names a different config hash fails unless `force` is set.
class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, std::string config_hash, bool force);

  void write(const std::string& name, std::string_view content);
  const std::filesystem::path& path() const noexcept { return dir_; }

 private:
  void write_manifest();

  std::filesystem::path dir_;
  std::string config_hash_;
  std::vector<std::string> files_;
};

std::string candidates_csv(std::span<const TrainSetSelection> sets,
                           const std::string& config_hash);
std::string scores_csv(std::span<const TrainSetSelection> sets,
                       const std::string& config_hash);
std::string probing_jsonl(std::span<const TrainSetSelection> sets,
                          const std::string& config_hash);
std::string selected_json(std::span<const TrainSetSelection> sets,
                          const Experiment& e);

/// Writes candidates.csv, probing_set.jsonl, scores.csv and selected.json.
void write_selection(OutputDir& out, std::span<const TrainSetSelection> sets,
                     const Experiment& e);

/// Rebuilds selection results from scores.csv and selected.json in `dir`.
/// Candidates are re-rendered from the experiment and checked against the
/// stored orderings; probing sets are not restored.
std::vector<TrainSetSelection> load_selection(const Experiment& e,
                                              const std::filesystem::path& dir);

std::string report_json(const RunReport& report);
RunReport parse_report_json(std::string_view text);
/// Table of strategy rows: strategy, dataset, mean, std, per-set values.
std::string report_csv(const RunReport& report);
/// Per-candidate predicted-label histograms next to accuracy.
std::string label_skew_csv(const RunReport& report);
std::string sweep_csv(const RunReport& report);
std::string correlation_csv(std::span<const std::string> names,
                            const std::vector<std::vector<double>>& matrix);

/// Writes report.json, report.csv and label_skew.csv.
void write_report(OutputDir& out, const RunReport& report);

/// Human-readable summary: one row per strategy, accuracy as
/// "mean (std)" in percent.
std::string format_table(const RunReport& report);

}  // namespace ordprobe
