#include "ordprobe/artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "ordprobe/error.hpp"

namespace ordprobe {
namespace {

using ojson = nlohmann::ordered_json;

const char* kManifest = "manifest.json";

std::string hash_line(const std::string& config_hash) {
  return "# config_hash=" + config_hash + "\n";
}

template <typename T>
std::string join(const std::vector<T>& xs, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_same_v<T, std::string>) {
      out += xs[i];
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

std::string row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += csv::escape(f);
    first = false;
  }
  out += '\n';
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::data, "line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::data, "line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

std::vector<std::size_t> parse_sizes(const std::string& s, std::size_t line) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_size(tok, line));
  return out;
}

// Splits "# config_hash=H\n<csv>" into H and the csv body.
std::pair<std::string, std::string> split_hash(const std::string& text,
                                               const std::string& what) {
  const std::string prefix = "# config_hash=";
  const auto nl = text.find('\n');
  if (text.rfind(prefix, 0) != 0 || nl == std::string::npos) {
    throw Error(ErrorKind::data, what + " lacks a config hash line");
  }
  return {text.substr(prefix.size(), nl - prefix.size()), text.substr(nl + 1)};
}

ojson json_double(double v) { return std::isfinite(v) ? ojson(v) : ojson(); }

double json_to_double(const ojson& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

const char* std_name(StdKind k) { return k == StdKind::sample ? "sample" : "population"; }

Strategy strategy_from(const std::string& name) {
  const auto s = parse_strategy(name);
  if (!s) throw Error(ErrorKind::data, "unknown strategy '" + name + "'");
  return *s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::io, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::io, "cannot rename '" + tmp.string() + "': " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

OutputDir::OutputDir(std::filesystem::path dir, std::string config_hash, bool force)
    : dir_(std::move(dir)), config_hash_(std::move(config_hash)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir_.string() + "': " + ec.message());
  const auto manifest = dir_ / kManifest;
  if (!std::filesystem::exists(manifest)) return;
  std::string previous;
  try {
    const auto j = ojson::parse(read_file(manifest));
    previous = j.at("config_hash").get<std::string>();
    if (previous == config_hash_) files_ = j.at("files").get<std::vector<std::string>>();
  } catch (const ojson::exception&) {
    previous = "<unreadable manifest>";
  }
  if (previous != config_hash_ && !force) {
    throw Error(ErrorKind::config, "'" + dir_.string() + "' holds artifacts of config " +
                                       previous + "; use --force to overwrite");
  }
}

void OutputDir::write(const std::string& name, std::string_view content) {
  write_atomic(dir_ / name, content);
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) {
    files_.push_back(name);
    std::sort(files_.begin(), files_.end());
  }
  write_manifest();
}

void OutputDir::write_manifest() {
  ojson j;
  j["config_hash"] = config_hash_;
  j["files"] = files_;
  write_atomic(dir_ / kManifest, j.dump(2) + "\n");
}

std::string candidates_csv(std::span<const TrainSetSelection> sets,
                           const std::string& config_hash) {
  std::string out = hash_line(config_hash);
  out += "train_set,train_seed,candidate_index,ordering,label_pattern,sample_ids\n";
  for (const auto& s : sets) {
    for (const auto& c : s.candidates) {
      std::vector<std::string> ids;
      for (auto i : c.ordering) ids.push_back(s.train_set.samples[i].id);
      out += row({std::to_string(s.set_index), std::to_string(s.train_set.seed),
                  std::to_string(c.index), ordering_to_string(c.ordering), c.label_pattern,
                  join(ids)});
    }
  }
  return out;
}

std::string scores_csv(std::span<const TrainSetSelection> sets,
                       const std::string& config_hash) {
  std::string out = hash_line(config_hash);
  out += "train_set,candidate_index,ordering,label_pattern,globalE,localE,histogram\n";
  for (const auto& s : sets) {
    for (std::size_t m = 0; m < s.scores.size(); ++m) {
      const auto& sc = s.scores[m];
      const auto& c = s.candidates[m];
      out += row({std::to_string(s.set_index), std::to_string(sc.candidate_index),
                  ordering_to_string(c.ordering), c.label_pattern,
                  format_double(sc.global_entropy), format_double(sc.local_entropy),
                  join(sc.histogram)});
    }
  }
  return out;
}

std::string probing_jsonl(std::span<const TrainSetSelection> sets,
                          const std::string& config_hash) {
  ojson meta;
  meta["config_hash"] = config_hash;
  meta["train_sets"] = ojson::array();
  for (const auto& s : sets) {
    const auto& d = s.probing.diagnostics;
    meta["train_sets"].push_back({{"train_set", s.set_index},
                                  {"probes", s.probing.size()},
                                  {"generations", d.generations},
                                  {"incomplete_segments", d.incomplete_segments},
                                  {"failed_candidates", d.failed_candidates},
                                  {"duplicate_probes", d.duplicate_probes}});
  }
  std::string out = meta.dump() + "\n";
  for (const auto& s : sets) {
    for (std::size_t i = 0; i < s.probing.size(); ++i) {
      ojson j;
      j["train_set"] = s.set_index;
      j["candidate"] = s.probing.provenance[i];
      j["text"] = s.probing.probes[i].text_a;
      if (s.probing.probes[i].text_b) j["text_b"] = *s.probing.probes[i].text_b;
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::string selected_json(std::span<const TrainSetSelection> sets, const Experiment& e) {
  ojson j;
  j["config_hash"] = e.config_hash;
  j["top_k"] = e.spec.run.top_k;
  j["train_sets"] = ojson::array();
  for (const auto& s : sets) {
    ojson set;
    set["index"] = s.set_index;
    set["seed"] = s.train_set.seed;
    std::vector<std::string> ids;
    for (const auto& x : s.train_set.samples) ids.push_back(x.id);
    set["sample_ids"] = ids;
    for (auto metric : {Metric::global_entropy, Metric::local_entropy}) {
      const auto& chosen =
          metric == Metric::global_entropy ? s.selected_global : s.selected_local;
      ojson list = ojson::array();
      for (auto m : chosen) {
        list.push_back({{"candidate", m},
                        {"ordering", s.candidates[m].ordering},
                        {"label_pattern", s.candidates[m].label_pattern},
                        {"score", json_double(metric_value(s.scores[m], metric))}});
      }
      set[to_string(metric)] = list;
    }
    j["train_sets"].push_back(set);
  }
  return j.dump(2) + "\n";
}

void write_selection(OutputDir& out, std::span<const TrainSetSelection> sets,
                     const Experiment& e) {
  out.write("candidates.csv", candidates_csv(sets, e.config_hash));
  out.write("probing_set.jsonl", probing_jsonl(sets, e.config_hash));
  out.write("scores.csv", scores_csv(sets, e.config_hash));
  out.write("selected.json", selected_json(sets, e));
}

std::vector<TrainSetSelection> load_selection(const Experiment& e,
                                              const std::filesystem::path& dir) {
  const auto scores_path = dir / "scores.csv";
  const auto selected_path = dir / "selected.json";
  if (!std::filesystem::exists(scores_path) || !std::filesystem::exists(selected_path)) {
    throw Error(ErrorKind::config, "no selection results in '" + dir.string() +
                                       "'; run select first");
  }
  const auto [hash, body] = split_hash(read_file(scores_path), "scores.csv");
  if (hash != e.config_hash) {
    throw Error(ErrorKind::config, "scores.csv was written by config " + hash +
                                       ", current config is " + e.config_hash +
                                       "; run select again");
  }
  ojson selected;
  try {
    selected = ojson::parse(read_file(selected_path));
  } catch (const ojson::exception& ex) {
    throw Error(ErrorKind::data, std::string("selected.json: ") + ex.what());
  }
  if (selected.value("config_hash", "") != e.config_hash) {
    throw Error(ErrorKind::config, "selected.json was written by a different config");
  }

  std::vector<TrainSetSelection> out(e.spec.num_train_sets());
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s].set_index = s;
    out[s].train_set = make_train_set(e, s);
    out[s].candidates = make_candidates(e, out[s].train_set);
    out[s].scores.resize(out[s].candidates.size());
  }
  std::vector<std::vector<bool>> seen(out.size());
  for (std::size_t s = 0; s < out.size(); ++s) seen[s].assign(out[s].candidates.size(), false);

  const auto records = csv::parse(body);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t line = rec.line + 1;
    if (rec.fields.size() != 7) {
      throw Error(ErrorKind::data, "scores.csv line " + std::to_string(line) +
                                       ": expected 7 fields");
    }
    const auto s = parse_size(rec.fields[0], line);
    const auto m = parse_size(rec.fields[1], line);
    if (s >= out.size() || m >= out[s].candidates.size()) {
      throw Error(ErrorKind::data, "scores.csv line " + std::to_string(line) +
                                       ": unknown candidate");
    }
    if (ordering_to_string(out[s].candidates[m].ordering) != rec.fields[2]) {
      throw Error(ErrorKind::data, "scores.csv line " + std::to_string(line) +
                                       ": ordering does not match the current candidates");
    }
    auto& sc = out[s].scores[m];
    sc.candidate_index = m;
    sc.global_entropy = parse_double(rec.fields[4], line);
    sc.local_entropy = parse_double(rec.fields[5], line);
    sc.histogram = parse_sizes(rec.fields[6], line);
    seen[s][m] = true;
  }
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (std::find(seen[s].begin(), seen[s].end(), false) != seen[s].end()) {
      throw Error(ErrorKind::data, "scores.csv misses candidates of train set " +
                                       std::to_string(s));
    }
  }

  try {
    const auto& sets = selected.at("train_sets");
    if (sets.size() != out.size()) {
      throw Error(ErrorKind::data, "selected.json covers a different number of train sets");
    }
    for (std::size_t s = 0; s < out.size(); ++s) {
      for (auto metric : {Metric::global_entropy, Metric::local_entropy}) {
        auto& chosen = metric == Metric::global_entropy ? out[s].selected_global
                                                        : out[s].selected_local;
        for (const auto& item : sets[s].at(to_string(metric))) {
          const auto m = item.at("candidate").get<std::size_t>();
          if (m >= out[s].candidates.size()) {
            throw Error(ErrorKind::data, "selected.json names an unknown candidate");
          }
          chosen.push_back(m);
        }
      }
    }
  } catch (const ojson::exception& ex) {
    throw Error(ErrorKind::data, std::string("selected.json: ") + ex.what());
  }
  return out;
}

std::string report_json(const RunReport& report) {
  ojson j;
  j["config_hash"] = report.config_hash;
  j["model_id"] = report.model_id;
  j["dataset"] = report.dataset;
  j["template"] = report.template_id;
  j["label_names"] = report.label_names;
  j["eval_size"] = report.eval_size;
  j["std"] = std_name(report.std_kind);
  j["strategies"] = ojson::array();
  for (auto s : report.strategies) {
    const auto& ms = report.summary.at(s);
    j["strategies"].push_back(
        {{"name", to_string(s)}, {"mean", json_double(ms.mean)}, {"std", json_double(ms.std)}});
  }
  j["train_sets"] = ojson::array();
  for (const auto& set : report.sets) {
    ojson t;
    t["index"] = set.set_index;
    t["seed"] = set.seed;
    t["sample_ids"] = set.sample_ids;
    t["candidates"] = ojson::array();
    for (const auto& c : set.candidates) {
      ojson cj;
      cj["index"] = c.index;
      cj["ordering"] = c.ordering;
      cj["label_pattern"] = c.label_pattern;
      if (c.global_entropy) cj["globalE"] = json_double(*c.global_entropy);
      if (c.local_entropy) cj["localE"] = json_double(*c.local_entropy);
      cj["accuracy"] = c.accuracy;
      cj["predicted_histogram"] = c.predicted_histogram;
      if (c.validation_accuracy) cj["validation_accuracy"] = *c.validation_accuracy;
      t["candidates"].push_back(cj);
    }
    t["selected"] = ojson::object();
    for (const auto& [s, idx] : set.selected) t["selected"][to_string(s)] = idx;
    if (set.split) {
      t["split"] = {{"prompt_ids", set.split->prompt_ids},
                    {"validation_ids", set.split->validation_ids},
                    {"selected_orderings", set.split->selected_orderings},
                    {"selected_accuracy", set.split->selected_accuracy}};
    }
    t["strategy_accuracy"] = ojson::object();
    for (auto s : report.strategies) {
      t["strategy_accuracy"][to_string(s)] = set.strategy_accuracy.at(s);
    }
    j["train_sets"].push_back(t);
  }
  auto sweep = [](const std::vector<SweepPoint>& pts) {
    ojson a = ojson::array();
    for (const auto& p : pts) a.push_back({{"k", p.k}, {"mean_accuracy", p.mean_accuracy}});
    return a;
  };
  j["sweep"] = {{"globalE", sweep(report.sweep_global)},
                {"localE", sweep(report.sweep_local)}};
  return j.dump(2) + "\n";
}

RunReport parse_report_json(std::string_view text) {
  RunReport r;
  try {
    const auto j = ojson::parse(text);
    r.config_hash = j.at("config_hash").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.template_id = j.at("template").get<std::string>();
    r.label_names = j.at("label_names").get<std::vector<std::string>>();
    r.eval_size = j.at("eval_size").get<std::size_t>();
    r.std_kind = j.at("std").get<std::string>() == "sample" ? StdKind::sample
                                                            : StdKind::population;
    for (const auto& s : j.at("strategies")) {
      const auto strategy = strategy_from(s.at("name").get<std::string>());
      r.strategies.push_back(strategy);
      r.summary[strategy] = MeanStd{json_to_double(s.at("mean")), json_to_double(s.at("std"))};
    }
    for (const auto& t : j.at("train_sets")) {
      TrainSetReport set;
      set.set_index = t.at("index").get<std::size_t>();
      set.seed = t.at("seed").get<std::uint64_t>();
      set.sample_ids = t.at("sample_ids").get<std::vector<std::string>>();
      for (const auto& cj : t.at("candidates")) {
        CandidateRecord c;
        c.index = cj.at("index").get<std::size_t>();
        c.ordering = cj.at("ordering").get<Ordering>();
        c.label_pattern = cj.at("label_pattern").get<std::string>();
        if (cj.contains("globalE")) c.global_entropy = json_to_double(cj["globalE"]);
        if (cj.contains("localE")) c.local_entropy = json_to_double(cj["localE"]);
        c.accuracy = cj.at("accuracy").get<double>();
        c.predicted_histogram = cj.at("predicted_histogram").get<std::vector<std::size_t>>();
        if (cj.contains("validation_accuracy")) {
          c.validation_accuracy = cj["validation_accuracy"].get<double>();
        }
        set.candidates.push_back(std::move(c));
      }
      for (const auto& [name, idx] : t.at("selected").items()) {
        set.selected[strategy_from(name)] = idx.get<std::vector<std::size_t>>();
      }
      if (t.contains("split")) {
        const auto& sj = t["split"];
        SplitRecord sp;
        sp.prompt_ids = sj.at("prompt_ids").get<std::vector<std::string>>();
        sp.validation_ids = sj.at("validation_ids").get<std::vector<std::string>>();
        sp.selected_orderings = sj.at("selected_orderings").get<std::vector<Ordering>>();
        sp.selected_accuracy = sj.at("selected_accuracy").get<std::vector<double>>();
        set.split = std::move(sp);
      }
      for (const auto& [name, v] : t.at("strategy_accuracy").items()) {
        set.strategy_accuracy[strategy_from(name)] = v.get<double>();
      }
      r.sets.push_back(std::move(set));
    }
    const auto& sw = j.at("sweep");
    for (const auto& p : sw.at("globalE")) {
      r.sweep_global.push_back(
          SweepPoint{p.at("k").get<std::size_t>(), p.at("mean_accuracy").get<double>()});
    }
    for (const auto& p : sw.at("localE")) {
      r.sweep_local.push_back(
          SweepPoint{p.at("k").get<std::size_t>(), p.at("mean_accuracy").get<double>()});
    }
  } catch (const ojson::exception& e) {
    throw Error(ErrorKind::data, std::string("report: ") + e.what());
  }
  return r;
}

std::string report_csv(const RunReport& report) {
  std::string out = hash_line(report.config_hash);
  out += "strategy,dataset,mean,std";
  for (std::size_t s = 0; s < report.sets.size(); ++s) out += ",set_" + std::to_string(s);
  out += '\n';
  for (auto strategy : report.strategies) {
    const auto& ms = report.summary.at(strategy);
    out += csv::escape(to_string(strategy)) + ',' + csv::escape(report.dataset) + ',' +
           format_double(ms.mean) + ',' + format_double(ms.std);
    for (const auto& set : report.sets) {
      out += ',' + format_double(set.strategy_accuracy.at(strategy));
    }
    out += '\n';
  }
  return out;
}

std::string label_skew_csv(const RunReport& report) {
  std::string out = hash_line(report.config_hash);
  out += "train_set,candidate_index,label_pattern,accuracy,predicted_histogram,max_label_share\n";
  for (const auto& set : report.sets) {
    for (const auto& c : set.candidates) {
      std::size_t total = 0, peak = 0;
      for (auto n : c.predicted_histogram) {
        total += n;
        peak = std::max(peak, n);
      }
      const double share = total ? static_cast<double>(peak) / static_cast<double>(total) : 0.0;
      out += row({std::to_string(set.set_index), std::to_string(c.index), c.label_pattern,
                  format_double(c.accuracy), join(c.predicted_histogram),
                  format_double(share)});
    }
  }
  return out;
}

std::string sweep_csv(const RunReport& report) {
  if (report.sweep_global.empty()) {
    throw Error(ErrorKind::config, "report has no entropy scores; run select before evaluate");
  }
  std::string out = hash_line(report.config_hash);
  out += "k,globalE,localE\n";
  for (std::size_t i = 0; i < report.sweep_global.size(); ++i) {
    out += std::to_string(report.sweep_global[i].k) + ',' +
           format_double(report.sweep_global[i].mean_accuracy) + ',' +
           format_double(report.sweep_local[i].mean_accuracy) + '\n';
  }
  return out;
}

std::string correlation_csv(std::span<const std::string> names,
                            const std::vector<std::vector<double>>& matrix) {
  std::string out = "model";
  for (const auto& n : names) out += ',' + csv::escape(n);
  out += '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out += csv::escape(names[i]);
    for (double v : matrix[i]) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

void write_report(OutputDir& out, const RunReport& report) {
  out.write("report.json", report_json(report));
  out.write("report.csv", report_csv(report));
  out.write("label_skew.csv", label_skew_csv(report));
}

std::string format_table(const RunReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "dataset %s, model %s, template %s, %zu eval examples, %zu train sets\n",
                report.dataset.c_str(), report.model_id.c_str(), report.template_id.c_str(),
                report.eval_size, report.sets.size());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10s %s\n", "strategy", "accuracy % (std)");
  out += buf;
  for (auto s : report.strategies) {
    const auto& ms = report.summary.at(s);
    std::snprintf(buf, sizeof buf, "%-10s %5.1f (%.1f)\n", to_string(s), 100.0 * ms.mean,
                  100.0 * ms.std);
    out += buf;
  }
  const auto all = report.summary.find(Strategy::all);
  const auto global = report.summary.find(Strategy::global_entropy);
  if (all != report.summary.end() && global != report.summary.end() && all->second.mean > 0) {
    std::snprintf(buf, sizeof buf, "globalE vs all: %+.1f%% relative\n",
                  100.0 * (global->second.mean - all->second.mean) / all->second.mean);
    out += buf;
  }
  return out;
}

}  // namespace ordprobe
