#include "ordprobe/template.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ordprobe/error.hpp"

namespace ordprobe {
namespace {

using json = nlohmann::json;
constexpr auto npos = std::string_view::npos;

std::string trim_single_space(std::string_view s) {
  if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  if (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return std::string(s);
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == npos;
}

bool contains(std::string_view haystack, std::string_view needle) {
  return !needle.empty() && haystack.find(needle) != npos;
}

// Position just past the last occurrence of `marker` lying wholly inside
// [from, limit), or `from` when there is none.
std::size_t after_last(std::string_view text, std::string_view marker,
                       std::size_t from, std::size_t limit) {
  if (marker.empty() || limit < from + marker.size()) return from;
  const auto k = text.rfind(marker, limit - marker.size());
  if (k == npos || k < from) return from;
  return k + marker.size();
}

PromptTemplate make(std::string id, std::string input_prefix,
                    std::string label_prefix, std::vector<std::string> keys,
                    std::vector<std::string> verbalizer) {
  PromptTemplate t;
  t.id = std::move(id);
  t.input_prefix = std::move(input_prefix);
  t.label_prefix = std::move(label_prefix);
  t.label_keys = std::move(keys);
  t.verbalizer = std::move(verbalizer);
  return t;
}

PromptTemplate make_pair(std::string id, std::vector<std::string> labels) {
  PromptTemplate t = make(std::move(id), "premise: ", "\nprediction:", labels,
                          labels);
  t.hypothesis_prefix = "\nhypothesis: ";
  return t;
}

std::vector<PromptTemplate> build_presets() {
  const std::vector<std::string> neg_pos = {"negative", "positive"};
  std::vector<PromptTemplate> out;

  // Newline layout, one sample per block.
  out.push_back(make("sst2", "Review: ", "\nSentiment:", neg_pos, neg_pos));
  auto sst5_labels = std::vector<std::string>{"terrible", "bad", "okay", "good",
                                              "great"};
  out.push_back(make("sst5", "Review: ", "\nSentiment:", sst5_labels,
                     sst5_labels));
  out.push_back(make("mr", "Review: ", "\nSentiment:", neg_pos, neg_pos));
  out.push_back(make("cr", "Review: ", "\nSentiment:", neg_pos, neg_pos));
  out.push_back(make("mpqa", "Review: ", "\nSentiment:", neg_pos, neg_pos));
  auto subj = std::vector<std::string>{"subjective", "objective"};
  out.push_back(make("subj", "Input: ", "\nType:", subj, subj));
  auto trec = std::vector<std::string>{"description", "entity", "expression",
                                       "human",       "location", "number"};
  out.push_back(make("trec", "Question: ", "\nType:", trec, trec));
  auto agnews = std::vector<std::string>{"world", "sports", "business",
                                         "technology"};
  out.push_back(make("agnews", "input: ", "\ntype:", agnews, agnews));
  auto dbpedia = std::vector<std::string>{
      "company", "school", "artist", "athlete", "politics",
      "transportation", "building", "nature", "village", "animal",
      "plant", "album", "film", "book"};
  out.push_back(make("dbpedia", "input: ", "\ntype:", dbpedia, dbpedia));
  out.push_back(make_pair("cb", {"true", "false", "neither"}));
  out.push_back(make_pair("rte", {"True", "False"}));

  // Inline layout: "Review: x. Sentiment: y. Review: ..."
  auto inline_sst2 =
      make("sst2_inline", "Review: ", ". Sentiment:", neg_pos, neg_pos);
  inline_sst2.sample_separator = ". ";
  inline_sst2.end_of_sample_marker = ".";
  out.push_back(inline_sst2);

  // Generic "input: x type: y" in both capitalisations; the verbalizer comes
  // from the dataset's label names at bind time.
  auto generic = make("generic", "input: ", " type:", {}, {});
  generic.sample_separator = "\n";
  out.push_back(generic);
  auto generic_caps = make("generic_caps", "Input: ", " Type:", {}, {});
  generic_caps.sample_separator = "\n";
  out.push_back(generic_caps);

  // Four SST-2 template variants.
  out.push_back(make("sst2_t1", "Review: ", "\nSentiment:", neg_pos, neg_pos));
  out.push_back(make("sst2_t2", "Input: ", "\nPrediction:", neg_pos, neg_pos));
  out.push_back(
      make("sst2_t3", "Review: ", "\nSentiment:", neg_pos, {"bad", "good"}));
  auto t4 = make("sst2_t4", "", " It was", neg_pos, {"bad", "good"});
  t4.sample_separator = "\n";
  out.push_back(t4);

  for (const auto& t : out) t.validate();
  return out;
}

PromptTemplate template_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config, "template must be an object");
  PromptTemplate t;
  try {
    t.id = j.value("id", std::string{});
    t.input_prefix = j.value("input_prefix", std::string{});
    if (j.contains("hypothesis_prefix") && !j["hypothesis_prefix"].is_null()) {
      t.hypothesis_prefix = j["hypothesis_prefix"].get<std::string>();
    }
    t.label_prefix = j.at("label_prefix").get<std::string>();
    t.label_lead = j.value("label_lead", std::string(" "));
    t.verbalizer = j.value("verbalizer", std::vector<std::string>{});
    t.label_keys = j.value("label_keys", std::vector<std::string>{});
    t.sample_separator = j.value("sample_separator", std::string("\n\n"));
    t.end_of_sample_marker = j.value("end_of_sample_marker", std::string("\n"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad template: ") + e.what());
  }
  t.validate();
  return t;
}

}  // namespace

std::string PromptTemplate::continuation(LabelId label) const {
  return label_lead + verbalizer.at(label);
}

std::vector<std::string> PromptTemplate::continuations() const {
  std::vector<std::string> out;
  out.reserve(verbalizer.size());
  for (LabelId v = 0; v < verbalizer.size(); ++v) out.push_back(continuation(v));
  return out;
}

void PromptTemplate::validate() const {
  const std::string name = id.empty() ? "template" : "template '" + id + "'";
  if (label_prefix.empty()) {
    throw Error(ErrorKind::config, name + ": label_prefix must be non-empty");
  }
  if (input_prefix.empty() && sample_separator.empty()) {
    throw Error(ErrorKind::config,
                name + ": an empty input_prefix needs a sample_separator");
  }
  if (hypothesis_prefix && hypothesis_prefix->empty()) {
    throw Error(ErrorKind::config, name + ": hypothesis_prefix is empty");
  }
  std::set<std::string> seen;
  for (const auto& v : verbalizer) {
    if (v.empty()) throw Error(ErrorKind::config, name + ": empty verbalizer");
    if (!seen.insert(v).second) {
      throw Error(ErrorKind::config, name + ": duplicate verbalizer '" + v + "'");
    }
  }
  if (!label_keys.empty() && label_keys.size() != verbalizer.size()) {
    throw Error(ErrorKind::config,
                name + ": label_keys and verbalizer differ in length");
  }
}

std::string linearize(const LabeledExample& x, bool with_label,
                      const PromptTemplate& tpl) {
  std::string out = tpl.input_prefix;
  out += x.text_a;
  if (tpl.pair_task()) {
    if (!x.text_b) {
      throw Error(ErrorKind::data, "example '" + x.id +
                                       "' lacks the second sentence required "
                                       "by pair template '" + tpl.id + "'");
    }
    out += *tpl.hypothesis_prefix;
    out += *x.text_b;
  }
  out += tpl.label_prefix;
  if (with_label) {
    if (x.label >= tpl.verbalizer.size()) {
      throw Error(ErrorKind::data, "example '" + x.id + "' has label " +
                                       std::to_string(x.label) +
                                       " outside the verbalizer");
    }
    out += tpl.continuation(x.label);
  }
  return out;
}

std::string concat(std::span<const std::string> parts,
                   const PromptTemplate& tpl) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += tpl.sample_separator;
    out += parts[i];
  }
  return out;
}

Extraction extract_detailed(std::string_view text, const PromptTemplate& tpl) {
  Extraction out;
  const std::string_view start = tpl.start_marker();
  const bool implicit_start = tpl.input_prefix.empty();
  const std::string_view label_prefix = tpl.label_prefix;
  std::size_t pos = 0;
  bool at_beginning = true;

  while (pos < text.size()) {
    std::size_t s;
    if (implicit_start && at_beginning) {
      s = pos;
    } else {
      const auto k = text.find(start, pos);
      if (k == npos) break;
      s = k + start.size();
    }
    at_beginning = false;

    std::optional<std::string> text_b;
    std::size_t j;
    std::size_t sentence_end;
    if (tpl.pair_task()) {
      const std::string_view hyp = *tpl.hypothesis_prefix;
      const auto h = text.find(hyp, s);
      if (h == npos) {
        if (!blank(text.substr(s))) ++out.incomplete;
        break;
      }
      s = after_last(text, start, s, h);
      sentence_end = h;
      const auto hs = h + hyp.size();
      j = text.find(label_prefix, hs);
      if (j == npos) {
        ++out.incomplete;
        break;
      }
      if (!start.empty()) {
        const auto restart = text.find(start, hs);
        if (restart != npos && restart + start.size() <= j) {
          // A new sample opened inside the hypothesis; drop this one.
          ++out.incomplete;
          pos = restart;
          continue;
        }
      }
      text_b = trim_single_space(text.substr(hs, j - hs));
    } else {
      j = text.find(label_prefix, s);
      if (j == npos) {
        if (!blank(text.substr(s))) ++out.incomplete;
        break;
      }
      s = after_last(text, start, s, j);
      sentence_end = j;
    }

    const auto l = j + label_prefix.size();
    std::size_t end = text.find('\n', l);
    if (!tpl.end_of_sample_marker.empty()) {
      end = std::min(end, text.find(tpl.end_of_sample_marker, l));
    }
    if (!start.empty()) end = std::min(end, text.find(start, l));
    const auto label_end = end == npos ? text.size() : end;

    std::string sentence = trim_single_space(text.substr(s, sentence_end - s));
    std::string label = trim_single_space(text.substr(l, label_end - l));
    if (blank(label) || blank(sentence) || (text_b && blank(*text_b))) {
      ++out.incomplete;
    } else {
      out.samples.push_back(
          ExtractedSample{std::move(sentence), std::move(text_b), std::move(label)});
    }
    pos = label_end;
  }
  return out;
}

std::vector<ExtractedSample> extract(std::string_view generated,
                                     const PromptTemplate& tpl) {
  return extract_detailed(generated, tpl).samples;
}

bool collides(const LabeledExample& x, const PromptTemplate& tpl) {
  auto bad = [&](std::string_view s) {
    return contains(s, tpl.label_prefix) || contains(s, tpl.start_marker()) ||
           (tpl.hypothesis_prefix && contains(s, *tpl.hypothesis_prefix));
  };
  return bad(x.text_a) || (x.text_b && bad(*x.text_b));
}

CompatibilityReport filter_compatible(const Dataset& d,
                                      const PromptTemplate& tpl) {
  CompatibilityReport report;
  report.dataset.name = d.name;
  report.dataset.label_names = d.label_names;
  report.dataset.pair_task = d.pair_task;
  for (const auto& x : d.examples) {
    if (collides(x, tpl)) {
      report.rejected_ids.push_back(x.id);
    } else {
      report.dataset.examples.push_back(x);
    }
  }
  if (!report.rejected_ids.empty()) {
    spdlog::warn("{}: dropped {} example(s) whose text contains a marker of "
                 "template '{}' (first: '{}')",
                 d.name, report.rejected_ids.size(), tpl.id,
                 report.rejected_ids.front());
  }
  return report;
}

PromptTemplate bind_template(const PromptTemplate& tpl, const Dataset& d) {
  if (tpl.pair_task() != d.pair_task) {
    throw Error(ErrorKind::config,
                "template '" + tpl.id + "' is " +
                    (tpl.pair_task() ? "a pair" : "a single-sentence") +
                    " template but dataset '" + d.name + "' is not");
  }
  PromptTemplate out = tpl;
  const auto& names = d.label_names;
  if (tpl.verbalizer.empty()) {
    out.verbalizer = names;
    out.label_keys = names;
    out.validate();
    return out;
  }

  if (!tpl.label_keys.empty()) {
    std::vector<std::string> verbalizer;
    for (const auto& name : names) {
      const auto it =
          std::find(tpl.label_keys.begin(), tpl.label_keys.end(), name);
      if (it == tpl.label_keys.end()) break;
      verbalizer.push_back(
          tpl.verbalizer[static_cast<std::size_t>(it - tpl.label_keys.begin())]);
    }
    if (verbalizer.size() == names.size()) {
      out.verbalizer = std::move(verbalizer);
      out.label_keys = names;
      out.validate();
      return out;
    }
  }

  bool positional = names.size() == tpl.verbalizer.size();
  if (positional && !tpl.label_keys.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      positional = positional && names[i] == std::to_string(i);
    }
  }
  if (!positional) {
    throw Error(ErrorKind::config, "cannot map the labels of dataset '" +
                                       d.name + "' onto template '" + tpl.id +
                                       "'");
  }
  out.label_keys = names;
  out.validate();
  return out;
}

const std::vector<PromptTemplate>& preset_templates() {
  static const std::vector<PromptTemplate> presets = build_presets();
  return presets;
}

const PromptTemplate& preset_template(std::string_view id) {
  for (const auto& t : preset_templates()) {
    if (t.id == id) return t;
  }
  throw Error(ErrorKind::config, "unknown template '" + std::string(id) + "'");
}

PromptTemplate parse_template(std::string_view json_text) {
  try {
    return template_from_json(json::parse(json_text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("bad template JSON: ") + e.what());
  }
}

std::vector<PromptTemplate> parse_templates(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("bad template JSON: ") + e.what());
  }
  const json& list = j.is_object() && j.contains("templates") ? j["templates"] : j;
  if (!list.is_array()) {
    throw Error(ErrorKind::config, "expected a template array");
  }
  std::vector<PromptTemplate> out;
  for (const auto& item : list) out.push_back(template_from_json(item));
  return out;
}

std::string template_to_json(const PromptTemplate& tpl) {
  json j;
  j["id"] = tpl.id;
  j["input_prefix"] = tpl.input_prefix;
  if (tpl.hypothesis_prefix) j["hypothesis_prefix"] = *tpl.hypothesis_prefix;
  j["label_prefix"] = tpl.label_prefix;
  j["label_lead"] = tpl.label_lead;
  j["verbalizer"] = tpl.verbalizer;
  j["label_keys"] = tpl.label_keys;
  j["sample_separator"] = tpl.sample_separator;
  j["end_of_sample_marker"] = tpl.end_of_sample_marker;
  return j.dump(2);
}

}  // namespace ordprobe
