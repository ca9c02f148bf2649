// ordprobe: choose few-shot prompt orderings with probing-set entropy.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ordprobe/artifacts.hpp"
#include "ordprobe/error.hpp"
#include "ordprobe/experiment.hpp"

namespace fs = std::filesystem;
using namespace ordprobe;

namespace {

struct RunFlags {
  std::string config;
  bool record = false;
  bool replay = false;
  std::string cache_dir;
  std::string out;
  bool force = false;
  std::optional<std::size_t> parallelism;
  std::optional<std::size_t> shots;
  std::optional<std::size_t> sets;
  std::optional<std::size_t> permutations;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> eval_subsample;
  std::optional<std::uint64_t> seed;
  std::optional<double> temperature;
  std::optional<std::size_t> max_new_tokens;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "Experiment config (JSON)")->required();
  auto* record = cmd->add_flag("--record", f.record, "Serve from the cache, record misses");
  cmd->add_flag("--replay", f.replay, "Serve from the cache only; a miss is an error")
      ->excludes(record);
  cmd->add_option("--cache-dir", f.cache_dir, "Cache directory (overrides the config)");
  cmd->add_option("-o,--out", f.out, "Output directory (overrides the config)");
  cmd->add_flag("--force", f.force, "Overwrite artifacts written by a different config");
  cmd->add_option("-j,--parallelism", f.parallelism, "Concurrent backend requests");
  cmd->add_option("--shots", f.shots, "Training samples per prompt (default 4; dbpedia 1, agnews 2)");
  cmd->add_option("--sets", f.sets, "Number of training sets (default 5)");
  cmd->add_option("--permutations", f.permutations, "Orderings per training set (default 24)");
  cmd->add_option("--top-k", f.top_k, "Selected orderings per metric (default 4)");
  cmd->add_option("--eval-subsample", f.eval_subsample, "Evaluation examples (default 256)");
  cmd->add_option("--seed", f.seed, "Run seed (default 0)");
  cmd->add_option("--temperature", f.temperature, "Probe sampling temperature (default 2)");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Probe generation length (default 128)");
}

ExperimentSpec load_spec(const RunFlags& f) {
  auto spec = load_experiment(f.config);
  if (f.record) spec.cache_mode = CacheSetting::record;
  if (f.replay) spec.cache_mode = CacheSetting::replay;
  if (!f.cache_dir.empty()) spec.cache_dir = fs::absolute(f.cache_dir);
  if (!f.out.empty()) spec.output_dir = fs::absolute(f.out);
  if (f.parallelism) spec.backend.parallelism = *f.parallelism;
  if (f.shots) spec.run.shots = *f.shots;
  if (f.sets) {
    spec.run.num_train_sets = *f.sets;
    spec.run.train_seeds.clear();
  }
  if (f.permutations) spec.run.max_permutations = *f.permutations;
  if (f.top_k) spec.run.top_k = *f.top_k;
  if (f.eval_subsample) spec.run.eval_subsample = *f.eval_subsample;
  if (f.seed) spec.run.seed = *f.seed;
  if (f.temperature) spec.generation.temperature = *f.temperature;
  if (f.max_new_tokens) spec.generation.max_new_tokens = *f.max_new_tokens;
  return spec;
}

void log_cache(const Experiment& e) {
  if (!e.cache) return;
  const auto s = e.cache->stats();
  spdlog::info("cache: {} hits, {} misses, {} backend calls, {} corrupt entries", s.hits,
               s.misses, s.backend_calls, s.corrupt);
}

int cmd_ingest(const std::string& path, const std::string& format, const std::string& name,
               const std::string& template_id) {
  LoadOptions opts;
  opts.name = name;
  DataFormat fmt = format_from_path(path);
  if (!format.empty()) {
    const auto parsed = parse_data_format(format);
    if (!parsed) throw Error(ErrorKind::config, "unknown format '" + format + "'");
    fmt = *parsed;
  }
  const auto d = load_dataset(path, fmt, opts);
  const auto counts = label_counts(d.examples, d.num_labels());
  std::printf("dataset %s: %zu examples, %s\n", d.name.c_str(), d.size(),
              d.pair_task ? "sentence pairs" : "single sentences");
  for (std::size_t v = 0; v < d.num_labels(); ++v) {
    std::printf("  label %zu %-16s %zu\n", v, d.label_names[v].c_str(), counts[v]);
  }
  std::printf("default shots: %zu\n", default_shots(d.name));
  if (!template_id.empty()) {
    const auto tpl = bind_template(preset_template(template_id), d);
    const auto report = filter_compatible(d, tpl);
    std::printf("template %s: %zu examples collide with its markers\n", tpl.id.c_str(),
                report.rejected_ids.size());
  }
  return 0;
}

int cmd_select(const RunFlags& f) {
  const auto spec = load_spec(f);
  auto e = open_experiment(spec);
  OutputDir out(spec.resolve(spec.output_dir), e.config_hash, f.force);
  const auto sets = run_select(e);
  write_selection(out, sets, e);
  log_cache(e);
  for (const auto& s : sets) {
    std::printf("train set %zu: %zu candidates, %zu probes, globalE top-%zu:", s.set_index,
                s.candidates.size(), s.probing.size(), s.selected_global.size());
    for (auto m : s.selected_global) std::printf(" %zu", m);
    std::printf("\n");
  }
  return 0;
}

int cmd_evaluate(const RunFlags& f, const std::vector<std::string>& names) {
  const auto spec = load_spec(f);
  std::vector<Strategy> strategies;
  for (const auto& n : names) {
    const auto s = parse_strategy(n);
    if (!s) throw Error(ErrorKind::config, "unknown strategy '" + n + "'");
    strategies.push_back(*s);
  }
  if (strategies.empty()) strategies = all_strategies();
  const bool needs_selection = std::any_of(strategies.begin(), strategies.end(), [](Strategy s) {
    return s == Strategy::local_entropy || s == Strategy::global_entropy;
  });

  auto e = open_experiment(spec);
  const auto dir = spec.resolve(spec.output_dir);
  OutputDir out(dir, e.config_hash, f.force);
  std::vector<TrainSetSelection> selections;
  if (needs_selection) selections = load_selection(e, dir);
  const auto report = run_evaluate(e, selections, strategies);
  write_report(out, report);
  if (!report.sweep_global.empty()) out.write("sweep.csv", sweep_csv(report));
  log_cache(e);
  std::fputs(format_table(report).c_str(), stdout);
  return 0;
}

fs::path report_path(const std::string& report, const std::string& config) {
  if (!report.empty()) return report;
  if (config.empty()) throw Error(ErrorKind::config, "give --report or --config");
  const auto spec = load_experiment(config);
  return spec.resolve(spec.output_dir) / "report.json";
}

int cmd_sweep(const std::string& report, const std::string& config, const std::string& out) {
  const auto path = report_path(report, config);
  const auto r = parse_report_json(read_file(path));
  const auto csv = sweep_csv(r);
  if (out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_atomic(out, csv);
  }
  return 0;
}

int cmd_correlate(const std::vector<std::string>& paths, std::vector<std::string> names,
                  bool by_pattern, const std::string& out) {
  std::vector<RunReport> reports;
  for (const auto& p : paths) reports.push_back(parse_report_json(read_file(p)));
  if (names.empty()) {
    for (const auto& r : reports) names.push_back(r.model_id);
  }
  if (names.size() != reports.size()) {
    throw Error(ErrorKind::config, "--names needs one name per report");
  }
  const auto matrix = correlate_reports(reports, by_pattern);
  const auto csv = correlation_csv(names, matrix);
  if (out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_atomic(out, csv);
  }
  return 0;
}

int cmd_report(const std::string& report, const std::string& config) {
  const auto r = parse_report_json(read_file(report_path(report, config)));
  std::fputs(format_table(r).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Select few-shot prompt orderings by probing-set entropy"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  std::string ingest_path, ingest_format, ingest_name, ingest_template;
  auto* ingest = app.add_subcommand("ingest", "Load a dataset and print a summary");
  ingest->add_option("path", ingest_path, "JSONL or CSV file")->required();
  ingest->add_option("--format", ingest_format, "jsonl or csv (default: by extension)");
  ingest->add_option("--name", ingest_name, "Dataset name (default: file stem)");
  ingest->add_option("--template", ingest_template, "Check marker collisions for a preset");

  RunFlags select_flags;
  auto* select = app.add_subcommand("select", "Probe, score and rank prompt orderings");
  add_run_flags(select, select_flags);

  RunFlags eval_flags;
  std::vector<std::string> strategies;
  auto* evaluate = app.add_subcommand("evaluate", "Measure accuracy of selection strategies");
  add_run_flags(evaluate, eval_flags);
  evaluate->add_option("-s,--strategy", strategies,
                       "all, localE, globalE, oracle, split, majority (default: every one)");

  std::string sweep_report, sweep_config, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Mean accuracy of the top-K orderings for every K");
  sweep->add_option("--report", sweep_report, "report.json written by evaluate");
  sweep->add_option("-c,--config", sweep_config, "Config whose output directory holds the report");
  sweep->add_option("-o,--out", sweep_out, "CSV file (default: stdout)");

  std::vector<std::string> corr_reports, corr_names;
  std::string corr_out;
  bool by_pattern = false;
  auto* correlate = app.add_subcommand("correlate", "Spearman matrix of ordering accuracies across models");
  correlate->add_option("--reports", corr_reports, "report.json files, one per model")
      ->required()
      ->expected(2, -1);
  correlate->add_option("--names", corr_names, "Row names (default: model ids)");
  correlate->add_flag("--by-pattern", by_pattern, "Correlate mean accuracy per label pattern");
  correlate->add_option("-o,--out", corr_out, "CSV file (default: stdout)");

  std::string report_file, report_config;
  auto* report = app.add_subcommand("report", "Print the strategy table of a report");
  report->add_option("--report", report_file, "report.json written by evaluate");
  report->add_option("-c,--config", report_config, "Config whose output directory holds the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  auto logger = spdlog::stderr_color_mt("ordprobe");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(quiet ? spdlog::level::err
                          : verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*ingest) return cmd_ingest(ingest_path, ingest_format, ingest_name, ingest_template);
    if (*select) return cmd_select(select_flags);
    if (*evaluate) return cmd_evaluate(eval_flags, strategies);
    if (*sweep) return cmd_sweep(sweep_report, sweep_config, sweep_out);
    if (*correlate) return cmd_correlate(corr_reports, corr_names, by_pattern, corr_out);
    if (*report) return cmd_report(report_file, report_config);
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
