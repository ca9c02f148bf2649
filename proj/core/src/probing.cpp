#include "ordprobe/probing.hpp"

#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ordprobe/error.hpp"
#include "ordprobe/parallel.hpp"
#include "ordprobe/rng.hpp"

namespace ordprobe {

ProbingSet build_probing_set(std::span<const PromptCandidate> candidates,
                             LanguageModel& backend, const PromptTemplate& tpl,
                             const ProbingOptions& options) {
  if (candidates.empty()) {
    throw Error(ErrorKind::config, "probing needs at least one candidate");
  }
  if (options.generations_per_candidate == 0) {
    throw Error(ErrorKind::config, "generations_per_candidate must be >= 1");
  }
  options.generation.validate();

  const std::size_t per = options.generations_per_candidate;
  const std::size_t total = candidates.size() * per;
  const std::uint64_t base_seed = options.generation.seed.value_or(0);

  // Results land in fixed slots so assembly does not depend on completion order.
  std::vector<Extraction> extractions(total);
  parallel_for(total, options.parallelism, [&](std::size_t g) {
    const auto& candidate = candidates[g / per];
    GenParams params = options.generation;
    params.seed = derive_seed(base_seed, "probe", candidate.index * per + g % per);
    const auto generation =
        backend.generate(candidate.context + tpl.sample_separator, params);
    extractions[g] = extract_detailed(generation.text, tpl);
  });

  ProbingSet set;
  set.diagnostics.generations = total;
  std::set<std::pair<std::string, std::optional<std::string>>> seen;
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    std::size_t contributed = 0;
    for (std::size_t r = 0; r < per; ++r) {
      auto& e = extractions[m * per + r];
      set.diagnostics.incomplete_segments += e.incomplete;
      for (auto& sample : e.samples) {
        if (!seen.emplace(sample.text_a, sample.text_b).second) {
          ++set.diagnostics.duplicate_probes;
        }
        set.probes.push_back(Probe{std::move(sample.text_a), std::move(sample.text_b)});
        set.provenance.push_back(candidates[m].index);
        ++contributed;
      }
    }
    if (contributed == 0) set.diagnostics.failed_candidates.push_back(candidates[m].index);
  }

  if (set.probes.empty()) {
    throw Error(ErrorKind::empty_probing_set,
                "empty probing set: none of " + std::to_string(total) +
                    " generations contained a complete sample");
  }
  if (set.size() < candidates.size()) {
    spdlog::warn("probing set has {} probe(s) for {} candidates", set.size(),
                 candidates.size());
  }
  return set;
}

LabeledExample probe_example(const Probe& probe) {
  return LabeledExample{"probe", probe.text_a, probe.text_b, 0};
}

std::string probing_set_to_jsonl(const ProbingSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    nlohmann::ordered_json j;
    j["candidate"] = set.provenance[i];
    j["text"] = set.probes[i].text_a;
    if (set.probes[i].text_b) j["text_b"] = *set.probes[i].text_b;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ordprobe
