#include "ordprobe/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "ordprobe/error.hpp"
#include "ordprobe/rng.hpp"

namespace ordprobe {
namespace {

using json = nlohmann::json;

// Row as read from disk, before labels are mapped to ids.
struct RawRow {
  std::size_t line = 0;
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;
  std::string label;
  bool pair = false;
};

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::data, "line " + std::to_string(line) + ": " + what);
}

std::string scalar_to_string(const json& v, std::size_t line,
                             const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail_at(line, std::string("field '") + field +
                    "' must be a string or an integer");
}

RawRow row_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) fail_at(line, "expected a JSON object");
  RawRow row;
  row.line = line;
  if (auto it = obj.find("id"); it != obj.end()) {
    row.id = scalar_to_string(*it, line, "id");
  } else {
    row.id = "line-" + std::to_string(line);
  }
  const auto label = obj.find("label");
  if (label == obj.end()) fail_at(line, "missing field 'label'");
  row.label = scalar_to_string(*label, line, "label");

  const auto text = obj.find("text");
  const auto premise = obj.find("premise");
  const auto hypothesis = obj.find("hypothesis");
  if (premise != obj.end() || hypothesis != obj.end()) {
    if (premise == obj.end() || hypothesis == obj.end() ||
        !premise->is_string() || !hypothesis->is_string()) {
      fail_at(line, "pair rows need string fields 'premise' and 'hypothesis'");
    }
    row.pair = true;
    row.text_a = premise->get<std::string>();
    row.text_b = hypothesis->get<std::string>();
  } else if (text != obj.end() && text->is_string()) {
    row.text_a = text->get<std::string>();
  } else {
    fail_at(line, "missing string field 'text' (or 'premise'/'hypothesis')");
  }
  return row;
}

std::vector<RawRow> read_jsonl(std::istream& in) {
  std::vector<RawRow> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail_at(line, std::string("malformed JSON: ") + e.what());
    }
    rows.push_back(row_from_json(obj, line));
  }
  return rows;
}

std::vector<RawRow> read_csv(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto records = csv::parse(buffer.str());
  if (records.empty()) return {};

  const auto& header = records.front().fields;
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto id_col = column("id");
  const auto text_col = column("text");
  const auto premise_col = column("premise");
  const auto hypothesis_col = column("hypothesis");
  const auto label_col = column("label");
  const bool pair = premise_col && hypothesis_col;
  if (!label_col) fail_at(1, "CSV header lacks a 'label' column");
  if (!pair && !text_col) {
    fail_at(1, "CSV header needs 'text' or 'premise'+'hypothesis' columns");
  }

  std::vector<RawRow> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      fail_at(rec.line, "expected " + std::to_string(header.size()) +
                            " fields, found " +
                            std::to_string(rec.fields.size()));
    }
    RawRow row;
    row.line = rec.line;
    row.id = id_col ? rec.fields[*id_col] : "line-" + std::to_string(rec.line);
    row.label = rec.fields[*label_col];
    row.pair = pair;
    if (pair) {
      row.text_a = rec.fields[*premise_col];
      row.text_b = rec.fields[*hypothesis_col];
    } else {
      row.text_a = rec.fields[*text_col];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

bool is_integer(const std::string& s, long long& value) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string> infer_label_names(const std::vector<RawRow>& rows) {
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.label);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  std::vector<std::pair<long long, std::string>> numeric;
  for (const auto& n : names) {
    long long v = 0;
    if (!is_integer(n, v)) return names;
    numeric.emplace_back(v, n);
  }
  std::sort(numeric.begin(), numeric.end());
  std::vector<std::string> out;
  for (auto& [v, n] : numeric) out.push_back(std::move(n));
  return out;
}

}  // namespace

DataFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv" ? DataFormat::csv : DataFormat::jsonl;
}

std::optional<DataFormat> parse_data_format(std::string_view name) {
  if (name == "jsonl") return DataFormat::jsonl;
  if (name == "csv") return DataFormat::csv;
  return std::nullopt;
}

Dataset parse_dataset(std::istream& in, DataFormat format,
                      const LoadOptions& options) {
  const auto rows = format == DataFormat::jsonl ? read_jsonl(in) : read_csv(in);
  if (rows.empty()) throw Error(ErrorKind::data, "empty dataset");

  Dataset d;
  d.name = options.name;
  d.pair_task = rows.front().pair;
  d.label_names = options.label_names ? *options.label_names
                                      : infer_label_names(rows);

  std::map<std::string, LabelId, std::less<>> index;
  for (LabelId i = 0; i < d.label_names.size(); ++i) {
    if (!index.emplace(d.label_names[i], i).second) {
      throw Error(ErrorKind::config,
                  "duplicate label name '" + d.label_names[i] + "'");
    }
  }

  d.examples.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.pair != d.pair_task) {
      fail_at(r.line, "mixes single-sentence and sentence-pair rows");
    }
    if (r.text_a.empty()) fail_at(r.line, "empty text");
    const auto it = index.find(r.label);
    if (it == index.end()) fail_at(r.line, "unknown label '" + r.label + "'");
    d.examples.push_back(LabeledExample{r.id, r.text_a, r.text_b, it->second});
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot open dataset '" + path.string() + "'");
  }
  LoadOptions opts = options;
  if (opts.name.empty()) opts.name = path.stem().string();
  return parse_dataset(in, format, opts);
}

TrainSet sample_train_set(const Dataset& d, std::size_t shots,
                          std::uint64_t seed, bool balanced) {
  if (shots == 0) throw Error(ErrorKind::config, "shots must be >= 1");
  if (shots > d.size()) {
    throw Error(ErrorKind::config,
                "cannot draw " + std::to_string(shots) + " shots from " +
                    std::to_string(d.size()) + " examples");
  }
  Rng rng(derive_seed(seed, "train_set"));
  std::vector<std::size_t> picked;

  if (!balanced || d.num_labels() <= 1) {
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `shots` slots are a uniform draw.
    for (std::size_t i = 0; i < shots; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(d.size() - i));
      std::swap(order[i], order[j]);
    }
    picked.assign(order.begin(), order.begin() + static_cast<long>(shots));
  } else {
    const std::size_t num_labels = d.num_labels();
    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < d.size(); ++i) {
      by_label[d.examples[i].label].push_back(i);
    }
    for (auto& group : by_label) rng.shuffle(std::span(group));

    // Labels ranked by dataset frequency, ties in seeded order.
    std::vector<LabelId> rank(num_labels);
    std::iota(rank.begin(), rank.end(), 0);
    rng.shuffle(std::span(rank));
    std::stable_sort(rank.begin(), rank.end(), [&](LabelId a, LabelId b) {
      return by_label[a].size() > by_label[b].size();
    });

    std::vector<std::size_t> quota(num_labels, shots / num_labels);
    for (std::size_t r = 0; r < shots % num_labels; ++r) ++quota[rank[r]];

    // Labels short of examples hand their slots to the others, by rank.
    std::size_t deficit = 0;
    for (LabelId v = 0; v < num_labels; ++v) {
      if (quota[v] > by_label[v].size()) {
        deficit += quota[v] - by_label[v].size();
        quota[v] = by_label[v].size();
      }
    }
    while (deficit > 0) {
      for (LabelId v : rank) {
        if (deficit == 0) break;
        if (quota[v] < by_label[v].size()) {
          ++quota[v];
          --deficit;
        }
      }
    }
    for (LabelId v = 0; v < num_labels; ++v) {
      picked.insert(picked.end(), by_label[v].begin(),
                    by_label[v].begin() + static_cast<long>(quota[v]));
    }
    rng.shuffle(std::span(picked));
  }

  TrainSet ts;
  ts.seed = seed;
  for (auto i : picked) ts.samples.push_back(d.examples[i]);
  return ts;
}

std::vector<LabeledExample> subsample_eval(const Dataset& d, std::size_t n,
                                           std::uint64_t seed) {
  const std::size_t take = std::min(n, d.size());
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "eval_subsample"));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(d.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());
  std::vector<LabeledExample> out;
  out.reserve(take);
  for (auto i : order) out.push_back(d.examples[i]);
  return out;
}

std::vector<std::size_t> label_counts(std::span<const LabeledExample> examples,
                                      std::size_t num_labels) {
  std::vector<std::size_t> counts(num_labels, 0);
  for (const auto& e : examples) {
    if (e.label < num_labels) ++counts[e.label];
  }
  return counts;
}

void RunConfig::validate() const {
  if (shots == 0) throw Error(ErrorKind::config, "shots must be >= 1");
  if (num_train_sets == 0 && train_seeds.empty()) {
    throw Error(ErrorKind::config, "need at least one train set");
  }
  if (top_k == 0) throw Error(ErrorKind::config, "top_k must be >= 1");
  if (max_permutations < top_k) {
    throw Error(ErrorKind::config, "max_permutations must be >= top_k");
  }
  if (eval_subsample == 0) {
    throw Error(ErrorKind::config, "eval_subsample must be >= 1");
  }
}

std::uint64_t RunConfig::train_seed(std::size_t set_index) const {
  if (!train_seeds.empty()) return train_seeds.at(set_index);
  return derive_seed(seed, "train_seed", set_index);
}

std::size_t default_shots(std::string_view dataset_name) {
  std::string lower(dataset_name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.find("dbpedia") != std::string::npos) return 1;
  if (lower.find("agnews") != std::string::npos ||
      lower.find("ag_news") != std::string::npos) {
    return 2;
  }
  return 4;
}

}  // namespace ordprobe
