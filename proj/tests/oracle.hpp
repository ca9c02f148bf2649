#pragma once

// Brute-force recomputation of the scoring pipeline with explicit loops,
// used to cross-check the library on small fixtures.

#include <cmath>
#include <string>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/probing.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe::oracle {

struct Result {
  std::vector<std::vector<std::size_t>> predictions;  // [candidate][probe]
  std::vector<double> global;
  std::vector<double> local;
  std::vector<std::size_t> rank_global;
  std::vector<std::size_t> rank_local;
};

inline std::string query_text(const std::string& context, const Probe& p,
                              const PromptTemplate& tpl) {
  std::string q = context + tpl.sample_separator + tpl.input_prefix + p.text_a;
  if (tpl.hypothesis_prefix) q += *tpl.hypothesis_prefix + *p.text_b;
  return q + tpl.label_prefix;
}

// Top-k by repeated selection of the strictly largest remaining value.
inline std::vector<std::size_t> select_top(const std::vector<double>& v, std::size_t k) {
  std::vector<bool> taken(v.size(), false);
  std::vector<std::size_t> out;
  while (out.size() < k && out.size() < v.size()) {
    std::size_t best = v.size();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (taken[i]) continue;
      if (best == v.size() || v[i] > v[best]) best = i;
    }
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

inline Result run(const std::vector<PromptCandidate>& candidates, const ProbingSet& probes,
                  LanguageModel& backend, const PromptTemplate& tpl, std::size_t k) {
  std::vector<std::string> conts;
  for (const auto& v : tpl.verbalizer) conts.push_back(tpl.label_lead + v);
  const std::size_t labels = conts.size();

  Result r;
  for (const auto& c : candidates) {
    std::vector<std::size_t> counts(labels, 0);
    std::vector<std::size_t> preds;
    double local_sum = 0.0;
    for (const auto& p : probes.probes) {
      const auto scores = backend.label_distribution(query_text(c.context, p, tpl), conts).scores;
      double peak = scores[0];
      for (std::size_t v = 1; v < labels; ++v) {
        if (scores[v] > peak) peak = scores[v];
      }
      std::vector<double> prob(labels);
      double z = 0.0;
      for (std::size_t v = 0; v < labels; ++v) {
        prob[v] = std::exp(scores[v] - peak);
        z += prob[v];
      }
      for (std::size_t v = 0; v < labels; ++v) prob[v] /= z;
      std::size_t arg = 0;
      for (std::size_t v = 1; v < labels; ++v) {
        if (prob[v] > prob[arg]) arg = v;
      }
      preds.push_back(arg);
      ++counts[arg];
      double h = 0.0;
      for (std::size_t v = 0; v < labels; ++v) {
        if (prob[v] > 0.0) h -= prob[v] * std::log(prob[v]);
      }
      local_sum += h;
    }
    double g = 0.0;
    for (std::size_t v = 0; v < labels; ++v) {
      if (counts[v] == 0) continue;
      const double p = static_cast<double>(counts[v]) / static_cast<double>(probes.size());
      g -= p * std::log(p);
    }
    r.predictions.push_back(preds);
    r.global.push_back(g);
    r.local.push_back(local_sum / static_cast<double>(probes.size()));
  }
  r.rank_global = select_top(r.global, k);
  r.rank_local = select_top(r.local, k);
  return r;
}

}  // namespace ordprobe::oracle
