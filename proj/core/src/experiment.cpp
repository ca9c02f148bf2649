#include "ordprobe/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ordprobe/error.hpp"
#include "ordprobe/mock_backend.hpp"
#include "ordprobe/openai_backend.hpp"
#include "ordprobe/rng.hpp"

namespace ordprobe {
namespace {

using json = nlohmann::json;

// Rejects keys outside `allowed` so that typos surface as config errors.
void check_keys(const json& j, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorKind::config, std::string(section) + " must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::config,
                  "unknown key '" + key + "' in " + std::string(section));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

DatasetSpec parse_dataset_spec(const json& j, std::string_view section) {
  check_keys(j, section, {"path", "format", "name", "label_names"});
  DatasetSpec d;
  if (!j.contains("path")) {
    throw Error(ErrorKind::config, std::string(section) + ".path is required");
  }
  d.path = j["path"].get<std::string>();
  if (j.contains("format")) {
    const auto name = j["format"].get<std::string>();
    d.format = parse_data_format(name);
    if (!d.format) throw Error(ErrorKind::config, "unknown data format '" + name + "'");
  }
  read(j, "name", d.name);
  if (j.contains("label_names")) {
    d.label_names = j["label_names"].get<std::vector<std::string>>();
  }
  return d;
}

json dataset_spec_json(const DatasetSpec& d) {
  json j;
  j["path"] = d.path.generic_string();
  if (d.format) j["format"] = *d.format == DataFormat::csv ? "csv" : "jsonl";
  j["name"] = d.name;
  if (d.label_names) j["label_names"] = *d.label_names;
  return j;
}

const char* to_string(StdKind k) {
  return k == StdKind::sample ? "sample" : "population";
}

void parse_backend(const json& j, BackendSpec& b) {
  check_keys(j, "backend",
             {"type", "model", "endpoint", "api_key_env", "context_window",
              "parallelism", "chars_per_token", "ngram_block_field",
              "max_attempts", "timeout_seconds", "mock"});
  if (j.contains("type")) {
    const auto type = j["type"].get<std::string>();
    if (type == "mock") {
      b.type = BackendType::mock;
    } else if (type == "openai") {
      b.type = BackendType::openai;
    } else {
      throw Error(ErrorKind::config, "unknown backend type '" + type + "'");
    }
  }
  read(j, "model", b.model);
  read(j, "endpoint", b.endpoint);
  read(j, "api_key_env", b.api_key_env);
  read(j, "context_window", b.context_window);
  read(j, "parallelism", b.parallelism);
  read(j, "chars_per_token", b.chars_per_token);
  read(j, "ngram_block_field", b.ngram_block_field);
  read(j, "max_attempts", b.max_attempts);
  read(j, "timeout_seconds", b.timeout_seconds);
  if (j.contains("mock")) {
    const auto& m = j["mock"];
    check_keys(m, "backend.mock",
               {"seed", "keywords", "keyword_weight", "context_keyword_weight",
                "recency_bias", "recency_decay", "noise", "corpus",
                "samples_per_generation", "trailing_text"});
    auto& s = b.mock;
    read(m, "seed", s.seed);
    if (m.contains("keywords")) {
      s.keywords = m["keywords"].get<std::map<std::string, std::vector<std::string>>>();
    }
    read(m, "keyword_weight", s.keyword_weight);
    read(m, "context_keyword_weight", s.context_keyword_weight);
    read(m, "recency_bias", s.recency_bias);
    read(m, "recency_decay", s.recency_decay);
    read(m, "noise", s.noise);
    if (m.contains("corpus") && !m["corpus"].is_null()) {
      s.corpus = m["corpus"].get<std::string>();
    }
    read(m, "samples_per_generation", s.samples_per_generation);
    read(m, "trailing_text", s.trailing_text);
  }
}

void parse_run(const json& j, ExperimentSpec& spec, bool& shots_given) {
  check_keys(j, "run",
             {"shots", "num_train_sets", "max_permutations", "top_k",
              "eval_subsample", "seed", "train_seeds", "balanced",
              "generations_per_candidate", "std", "probabilities",
              "oracle_validation", "oracle_validation_size"});
  auto& r = spec.run;
  shots_given = j.contains("shots");
  read(j, "shots", r.shots);
  read(j, "num_train_sets", r.num_train_sets);
  read(j, "max_permutations", r.max_permutations);
  read(j, "top_k", r.top_k);
  read(j, "eval_subsample", r.eval_subsample);
  read(j, "seed", r.seed);
  read(j, "train_seeds", r.train_seeds);
  read(j, "balanced", r.balanced);
  read(j, "generations_per_candidate", spec.generations_per_candidate);
  if (j.contains("std")) {
    const auto v = j["std"].get<std::string>();
    if (v == "population") {
      spec.std_kind = StdKind::population;
    } else if (v == "sample") {
      spec.std_kind = StdKind::sample;
    } else {
      throw Error(ErrorKind::config, "run.std must be population or sample");
    }
  }
  if (j.contains("probabilities")) {
    const auto v = j["probabilities"].get<std::string>();
    if (v == "normalized") {
      spec.probabilities = ProbabilityMode::normalized;
    } else if (v == "raw") {
      spec.probabilities = ProbabilityMode::raw;
    } else {
      throw Error(ErrorKind::config, "run.probabilities must be normalized or raw");
    }
  }
  if (j.contains("oracle_validation")) {
    const auto v = j["oracle_validation"].get<std::string>();
    if (v == "same") {
      spec.oracle_validation = OracleValidation::same;
    } else if (v == "disjoint") {
      spec.oracle_validation = OracleValidation::disjoint;
    } else {
      throw Error(ErrorKind::config, "run.oracle_validation must be same or disjoint");
    }
  }
  read(j, "oracle_validation_size", spec.oracle_validation_size);
}

void parse_generation(const json& j, GenParams& g) {
  check_keys(j, "generation",
             {"temperature", "max_new_tokens", "block_ngram", "stop_sequences", "seed"});
  read(j, "temperature", g.temperature);
  read(j, "max_new_tokens", g.max_new_tokens);
  read(j, "block_ngram", g.block_ngram);
  read(j, "stop_sequences", g.stop_sequences);
  if (j.contains("seed") && !j["seed"].is_null()) g.seed = j["seed"].get<std::uint64_t>();
}

void parse_cache(const json& j, ExperimentSpec& spec) {
  check_keys(j, "cache", {"dir", "mode"});
  if (j.contains("dir") && !j["dir"].is_null()) spec.cache_dir = j["dir"].get<std::string>();
  if (j.contains("mode")) {
    const auto v = j["mode"].get<std::string>();
    if (v == "live") {
      spec.cache_mode = CacheSetting::live;
    } else if (v == "record") {
      spec.cache_mode = CacheSetting::record;
    } else if (v == "replay") {
      spec.cache_mode = CacheSetting::replay;
    } else {
      throw Error(ErrorKind::config, "cache.mode must be live, record or replay");
    }
  }
}

std::vector<std::string> ids_of(std::span<const LabeledExample> xs) {
  std::vector<std::string> out;
  for (const auto& x : xs) out.push_back(x.id);
  return out;
}

std::shared_ptr<LanguageModel> make_inner_backend(const ExperimentSpec& spec,
                                                  const Dataset& dataset,
                                                  const PromptTemplate& tpl) {
  const auto& b = spec.backend;
  if (b.type == BackendType::openai) {
    OpenAIConfig c;
    c.base_url = b.endpoint;
    c.model = b.model;
    if (const char* key = std::getenv(b.api_key_env.c_str())) c.api_key = key;
    c.context_window = b.context_window;
    c.chars_per_token = b.chars_per_token;
    c.ngram_block_field = b.ngram_block_field;
    c.max_attempts = b.max_attempts;
    c.timeout = std::chrono::seconds(b.timeout_seconds);
    return std::make_shared<OpenAICompletionsBackend>(std::move(c));
  }
  MockConfig m;
  m.model_id = b.model;
  m.context_window = b.context_window;
  m.seed = b.mock.seed;
  m.keyword_weight = b.mock.keyword_weight;
  m.context_keyword_weight = b.mock.context_keyword_weight;
  m.recency_bias = b.mock.recency_bias;
  m.recency_decay = b.mock.recency_decay;
  m.noise = b.mock.noise;
  m.samples_per_generation = b.mock.samples_per_generation;
  m.trailing_text = b.mock.trailing_text;
  m.sample_template = tpl;
  for (const auto& [label, _] : b.mock.keywords) {
    if (std::find(dataset.label_names.begin(), dataset.label_names.end(), label) ==
        dataset.label_names.end()) {
      throw Error(ErrorKind::config, "mock keywords name unknown label '" + label + "'");
    }
  }
  for (const auto& label : dataset.label_names) {
    const auto it = b.mock.keywords.find(label);
    m.keywords.push_back(it == b.mock.keywords.end() ? std::vector<std::string>{}
                                                     : it->second);
  }
  if (b.mock.corpus) {
    DatasetSpec corpus_spec;
    corpus_spec.path = *b.mock.corpus;
    auto corpus = load_dataset(corpus_spec, spec.base_dir, dataset.label_names);
    m.corpus = filter_compatible(corpus, tpl).dataset.examples;
  } else {
    m.corpus = dataset.examples;
  }
  return std::make_shared<MockBackend>(std::move(m));
}

}  // namespace

std::size_t ExperimentSpec::num_train_sets() const {
  return run.train_seeds.empty() ? run.num_train_sets : run.train_seeds.size();
}

void ExperimentSpec::validate() const {
  run.validate();
  generation.validate();
  tpl.validate();
  if (generations_per_candidate == 0) {
    throw Error(ErrorKind::config, "generations_per_candidate must be >= 1");
  }
  if (backend.parallelism == 0) throw Error(ErrorKind::config, "parallelism must be >= 1");
  if (backend.context_window == 0) {
    throw Error(ErrorKind::config, "context_window must be >= 1");
  }
  if (cache_mode != CacheSetting::live && !cache_dir) {
    throw Error(ErrorKind::config, "record/replay mode needs cache.dir");
  }
  if (cache_mode == CacheSetting::replay && !std::filesystem::is_directory(resolve(*cache_dir))) {
    throw Error(ErrorKind::fixture_incomplete,
                "replay cache '" + resolve(*cache_dir).string() + "' does not exist");
  }
  if (oracle_validation == OracleValidation::disjoint && oracle_validation_size == 0) {
    throw Error(ErrorKind::config, "oracle_validation_size must be >= 1");
  }
}

std::string ExperimentSpec::canonical_json() const {
  json j;
  j["dataset"] = dataset_spec_json(dataset);
  if (eval_dataset) j["eval_dataset"] = dataset_spec_json(*eval_dataset);
  j["template"] = json::parse(template_to_json(tpl));

  json b;
  b["type"] = backend.type == BackendType::mock ? "mock" : "openai";
  b["model"] = backend.model;
  b["context_window"] = backend.context_window;
  if (backend.type == BackendType::openai) {
    b["endpoint"] = backend.endpoint;
    b["chars_per_token"] = backend.chars_per_token;
    b["ngram_block_field"] = backend.ngram_block_field;
  } else {
    const auto& m = backend.mock;
    b["mock"] = {{"seed", m.seed},
                 {"keywords", m.keywords},
                 {"keyword_weight", m.keyword_weight},
                 {"context_keyword_weight", m.context_keyword_weight},
                 {"recency_bias", m.recency_bias},
                 {"recency_decay", m.recency_decay},
                 {"noise", m.noise},
                 {"corpus", m.corpus ? json(m.corpus->generic_string()) : json()},
                 {"samples_per_generation", m.samples_per_generation},
                 {"trailing_text", m.trailing_text}};
  }
  j["backend"] = b;

  j["run"] = {{"shots", run.shots},
              {"num_train_sets", run.num_train_sets},
              {"max_permutations", run.max_permutations},
              {"top_k", run.top_k},
              {"eval_subsample", run.eval_subsample},
              {"seed", run.seed},
              {"train_seeds", run.train_seeds},
              {"balanced", run.balanced},
              {"generations_per_candidate", generations_per_candidate},
              {"std", to_string(std_kind)},
              {"probabilities",
               probabilities == ProbabilityMode::raw ? "raw" : "normalized"},
              {"oracle_validation",
               oracle_validation == OracleValidation::same ? "same" : "disjoint"},
              {"oracle_validation_size", oracle_validation_size}};
  j["generation"] = {{"temperature", generation.temperature},
                     {"max_new_tokens", generation.max_new_tokens},
                     {"block_ngram", generation.block_ngram},
                     {"stop_sequences", generation.stop_sequences},
                     {"seed", generation.seed ? json(*generation.seed) : json()}};
  return j.dump();
}

std::string ExperimentSpec::config_hash() const { return sha256_hex(canonical_json()); }

std::filesystem::path ExperimentSpec::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

ExperimentSpec parse_experiment(std::string_view json_text,
                                const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  spec.base_dir = base_dir;
  bool shots_given = false;
  try {
    const json j = json::parse(json_text);
    check_keys(j, "config",
               {"dataset", "eval_dataset", "template", "backend", "run",
                "generation", "cache", "output_dir"});
    if (!j.contains("dataset")) throw Error(ErrorKind::config, "config needs a dataset");
    spec.dataset = parse_dataset_spec(j["dataset"], "dataset");
    if (j.contains("eval_dataset") && !j["eval_dataset"].is_null()) {
      spec.eval_dataset = parse_dataset_spec(j["eval_dataset"], "eval_dataset");
    }
    if (!j.contains("template")) throw Error(ErrorKind::config, "config needs a template");
    if (j["template"].is_string()) {
      spec.tpl = preset_template(j["template"].get<std::string>());
    } else {
      spec.tpl = parse_template(j["template"].dump());
    }
    if (j.contains("backend")) parse_backend(j["backend"], spec.backend);
    if (j.contains("run")) parse_run(j["run"], spec, shots_given);
    if (j.contains("generation")) parse_generation(j["generation"], spec.generation);
    if (j.contains("cache")) parse_cache(j["cache"], spec);
    if (j.contains("output_dir")) spec.output_dir = j["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("config: ") + e.what());
  }
  if (spec.dataset.name.empty()) spec.dataset.name = spec.dataset.path.stem().string();
  if (!shots_given) spec.run.shots = default_shots(spec.dataset.name);
  if (!spec.generation.seed) spec.generation.seed = spec.run.seed;
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& config_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::config, "cannot open config '" + config_path.string() + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), config_path.parent_path().empty()
                                         ? std::filesystem::path(".")
                                         : config_path.parent_path());
}

Dataset load_dataset(const DatasetSpec& spec, const std::filesystem::path& base_dir,
                     const std::optional<std::vector<std::string>>& label_names) {
  const auto path = spec.path.is_absolute() ? spec.path : base_dir / spec.path;
  LoadOptions opts;
  opts.name = spec.name.empty() ? spec.path.stem().string() : spec.name;
  opts.label_names = spec.label_names ? spec.label_names : label_names;
  return load_dataset(path, spec.format.value_or(format_from_path(path)), opts);
}

Experiment open_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Experiment e;
  e.spec = spec;
  e.config_hash = spec.config_hash();

  const auto raw = load_dataset(spec.dataset, spec.base_dir);
  e.tpl = bind_template(spec.tpl, raw);
  e.dataset = filter_compatible(raw, e.tpl).dataset;
  if (e.dataset.pair_task != e.tpl.pair_task()) {
    throw Error(ErrorKind::config, "template '" + e.tpl.id + "' and dataset '" +
                                       e.dataset.name + "' disagree on sentence pairs");
  }

  Dataset eval_pool = e.dataset;
  if (spec.eval_dataset) {
    eval_pool = filter_compatible(
                    load_dataset(*spec.eval_dataset, spec.base_dir, raw.label_names), e.tpl)
                    .dataset;
    if (eval_pool.label_names != e.dataset.label_names) {
      throw Error(ErrorKind::config, "evaluation labels differ from training labels");
    }
  } else {
    spdlog::warn("no eval_dataset given; evaluating on the training file, which may overlap the shots");
  }
  draw_eval_sets(e, eval_pool);

  const auto& b = spec.backend;
  const BackendInfo info{b.model, b.context_window};
  std::shared_ptr<LanguageModel> inner;
  if (spec.cache_mode != CacheSetting::replay) {
    inner = make_inner_backend(spec, e.dataset, e.tpl);
  }
  if (spec.cache_mode == CacheSetting::live) {
    e.backend = inner;
  } else {
    e.cache = std::make_shared<CachingBackend>(
        inner, info, spec.resolve(*spec.cache_dir),
        spec.cache_mode == CacheSetting::record ? CacheMode::record : CacheMode::replay);
    e.backend = e.cache;
  }
  return e;
}

void draw_eval_sets(Experiment& e, const Dataset& eval_pool) {
  const auto& spec = e.spec;
  e.eval_set = subsample_eval(eval_pool, spec.run.eval_subsample,
                              derive_seed(spec.run.seed, "eval_subsample"));
  e.oracle_validation.clear();
  if (spec.oracle_validation == OracleValidation::disjoint) {
    std::set<std::string> used;
    for (const auto& x : e.eval_set) used.insert(x.id);
    Dataset rest = eval_pool;
    rest.examples.clear();
    for (const auto& x : eval_pool.examples) {
      if (!used.count(x.id)) rest.examples.push_back(x);
    }
    if (rest.examples.empty()) {
      throw Error(ErrorKind::config,
                  "no examples left for a disjoint oracle validation set");
    }
    e.oracle_validation = subsample_eval(rest, spec.oracle_validation_size,
                                         derive_seed(spec.run.seed, "oracle_validation"));
  }
}

TrainSet make_train_set(const Experiment& e, std::size_t set_index) {
  return sample_train_set(e.dataset, e.spec.run.shots, e.spec.run.train_seed(set_index),
                          e.spec.run.balanced);
}

std::vector<PromptCandidate> make_candidates(const Experiment& e, const TrainSet& ts) {
  const auto orderings = enumerate_orderings(ts.shots(), e.spec.run.max_permutations,
                                             derive_seed(ts.seed, "orderings"));
  auto candidates = render_candidates(ts, e.tpl, orderings, e.dataset.label_names);
  for (const auto& group : duplicate_contexts(candidates)) {
    spdlog::warn("train set seed {}: {} candidates share one context (first: {})",
                 ts.seed, group.size(), group.front());
  }
  return candidates;
}

std::vector<TrainSetSelection> run_select(const Experiment& e) {
  std::vector<TrainSetSelection> out;
  for (std::size_t s = 0; s < e.spec.num_train_sets(); ++s) {
    TrainSetSelection sel;
    sel.set_index = s;
    sel.train_set = make_train_set(e, s);
    sel.candidates = make_candidates(e, sel.train_set);

    ProbingOptions popts;
    popts.generation = e.spec.generation;
    popts.generations_per_candidate = e.spec.generations_per_candidate;
    popts.parallelism = e.spec.backend.parallelism;
    sel.probing = build_probing_set(sel.candidates, *e.backend, e.tpl, popts);

    ScoringOptions sopts;
    sopts.parallelism = e.spec.backend.parallelism;
    sopts.probabilities = e.spec.probabilities;
    sel.scores = score_candidates(sel.candidates, sel.probing, *e.backend, e.tpl, sopts);
    sel.selected_global = rank_candidates(sel.scores, Metric::global_entropy, e.spec.run.top_k);
    sel.selected_local = rank_candidates(sel.scores, Metric::local_entropy, e.spec.run.top_k);
    spdlog::info("train set {}: {} candidates, {} probes", s, sel.candidates.size(),
                 sel.probing.size());
    out.push_back(std::move(sel));
  }
  return out;
}

RunReport run_evaluate(const Experiment& e,
                       std::span<const TrainSetSelection> selections,
                       std::span<const Strategy> strategies) {
  const bool wants_scores = std::any_of(strategies.begin(), strategies.end(), [](Strategy s) {
    return s == Strategy::local_entropy || s == Strategy::global_entropy;
  });
  if (wants_scores && selections.size() != e.spec.num_train_sets()) {
    throw Error(ErrorKind::config,
                "entropy strategies need selection results for every train set; run select first");
  }
  auto wants = [&](Strategy s) {
    return std::find(strategies.begin(), strategies.end(), s) != strategies.end();
  };
  const std::size_t parallelism = e.spec.backend.parallelism;
  const std::size_t k = e.spec.run.top_k;

  RunReport report;
  report.config_hash = e.config_hash;
  report.model_id = e.backend->info().model_id;
  report.dataset = e.dataset.name;
  report.template_id = e.tpl.id;
  report.label_names = e.dataset.label_names;
  report.eval_size = e.eval_set.size();
  report.std_kind = e.spec.std_kind;
  for (auto s : all_strategies()) {
    if (wants(s)) report.strategies.push_back(s);
  }

  std::vector<std::vector<double>> acc_per_set, global_per_set, local_per_set;
  for (std::size_t s = 0; s < e.spec.num_train_sets(); ++s) {
    const TrainSetSelection* sel = s < selections.size() ? &selections[s] : nullptr;
    const TrainSet ts = sel ? sel->train_set : make_train_set(e, s);
    const auto candidates = sel ? sel->candidates : make_candidates(e, ts);

    TrainSetReport set;
    set.set_index = s;
    set.seed = ts.seed;
    set.sample_ids = ids_of(ts.samples);

    const auto evals = evaluate_candidates(candidates, e.eval_set, *e.backend, e.tpl, parallelism);
    std::vector<double> acc;
    for (std::size_t m = 0; m < candidates.size(); ++m) {
      CandidateRecord r;
      r.index = candidates[m].index;
      r.ordering = candidates[m].ordering;
      r.label_pattern = candidates[m].label_pattern;
      if (sel) {
        r.global_entropy = sel->scores[m].global_entropy;
        r.local_entropy = sel->scores[m].local_entropy;
      }
      r.accuracy = evals[m].accuracy;
      r.predicted_histogram = evals[m].predicted_histogram;
      acc.push_back(r.accuracy);
      set.candidates.push_back(std::move(r));
    }

    if (wants(Strategy::majority)) {
      set.strategy_accuracy[Strategy::majority] = majority_baseline(e.eval_set);
    }
    if (wants(Strategy::all)) {
      std::vector<std::size_t> every(candidates.size());
      std::iota(every.begin(), every.end(), 0);
      set.strategy_accuracy[Strategy::all] = mean_of(acc, every);
    }
    if (wants(Strategy::local_entropy)) {
      set.selected[Strategy::local_entropy] = sel->selected_local;
      set.strategy_accuracy[Strategy::local_entropy] = mean_of(acc, sel->selected_local);
    }
    if (wants(Strategy::global_entropy)) {
      set.selected[Strategy::global_entropy] = sel->selected_global;
      set.strategy_accuracy[Strategy::global_entropy] = mean_of(acc, sel->selected_global);
    }
    if (wants(Strategy::oracle)) {
      std::vector<double> validation = acc;
      if (!e.oracle_validation.empty()) {
        const auto v = evaluate_candidates(candidates, e.oracle_validation, *e.backend,
                                           e.tpl, parallelism);
        for (std::size_t m = 0; m < v.size(); ++m) {
          validation[m] = v[m].accuracy;
          set.candidates[m].validation_accuracy = v[m].accuracy;
        }
      }
      set.selected[Strategy::oracle] = oracle_select(validation, k);
      set.strategy_accuracy[Strategy::oracle] = mean_of(acc, set.selected[Strategy::oracle]);
    }
    if (wants(Strategy::split)) {
      const auto split = split_train_select(ts, e.tpl, *e.backend, k, e.dataset.label_names,
                                            e.spec.run.max_permutations, parallelism);
      std::vector<PromptCandidate> chosen;
      for (auto idx : split.selected) chosen.push_back(split.candidates[idx]);
      const auto split_evals =
          evaluate_candidates(chosen, e.eval_set, *e.backend, e.tpl, parallelism);
      SplitRecord rec;
      rec.prompt_ids = ids_of(split.prompt_samples.samples);
      rec.validation_ids = ids_of(split.validation);
      double sum = 0.0;
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        rec.selected_orderings.push_back(chosen[i].ordering);
        rec.selected_accuracy.push_back(split_evals[i].accuracy);
        sum += split_evals[i].accuracy;
      }
      set.split = std::move(rec);
      set.strategy_accuracy[Strategy::split] = sum / static_cast<double>(chosen.size());
    }

    if (sel) {
      std::vector<double> g, l;
      for (const auto& sc : sel->scores) {
        g.push_back(sc.global_entropy);
        l.push_back(sc.local_entropy);
      }
      global_per_set.push_back(std::move(g));
      local_per_set.push_back(std::move(l));
    }
    acc_per_set.push_back(std::move(acc));
    report.sets.push_back(std::move(set));
  }

  for (auto s : report.strategies) {
    std::vector<double> per_set;
    for (const auto& set : report.sets) per_set.push_back(set.strategy_accuracy.at(s));
    report.summary[s] = run_statistics(per_set, e.spec.std_kind);
  }
  if (global_per_set.size() == acc_per_set.size() && !acc_per_set.empty()) {
    report.sweep_global = topk_sweep(global_per_set, acc_per_set);
    report.sweep_local = topk_sweep(local_per_set, acc_per_set);
  }
  return report;
}

std::vector<std::vector<double>> correlate_reports(std::span<const RunReport> reports,
                                                   bool by_pattern) {
  if (reports.size() < 2) throw Error(ErrorKind::config, "correlate needs at least two reports");
  const auto& ref = reports.front();
  std::vector<std::vector<double>> rows;
  for (const auto& r : reports) {
    if (r.sets.size() != ref.sets.size()) {
      throw Error(ErrorKind::data, "reports cover different numbers of train sets");
    }
    std::vector<double> row;
    std::map<std::pair<std::size_t, std::string>, std::pair<double, std::size_t>> patterns;
    for (std::size_t s = 0; s < r.sets.size(); ++s) {
      const auto& a = r.sets[s];
      const auto& b = ref.sets[s];
      if (a.sample_ids != b.sample_ids || a.candidates.size() != b.candidates.size()) {
        throw Error(ErrorKind::data, "train set " + std::to_string(s) +
                                         " differs between reports");
      }
      for (std::size_t m = 0; m < a.candidates.size(); ++m) {
        if (a.candidates[m].ordering != b.candidates[m].ordering) {
          throw Error(ErrorKind::data, "candidate orderings differ between reports (set " +
                                           std::to_string(s) + ", candidate " +
                                           std::to_string(m) + ")");
        }
        if (by_pattern) {
          auto& [sum, count] = patterns[{s, a.candidates[m].label_pattern}];
          sum += a.candidates[m].accuracy;
          ++count;
        } else {
          row.push_back(a.candidates[m].accuracy);
        }
      }
    }
    for (const auto& [_, v] : patterns) row.push_back(v.first / static_cast<double>(v.second));
    rows.push_back(std::move(row));
  }
  return correlation_matrix(rows);
}

}  // namespace ordprobe
