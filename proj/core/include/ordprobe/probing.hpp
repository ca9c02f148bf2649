#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

/// An unlabeled probe input extracted from a model generation.
struct Probe {
  std::string text_a;
  std::optional<std::string> text_b;

  bool operator==(const Probe&) const = default;
};

struct ProbingDiagnostics {
  std::size_t generations = 0;
  /// Segments that opened but never reached a label.
  std::size_t incomplete_segments = 0;
  /// Candidates none of whose generations yielded a probe.
  std::vector<std::size_t> failed_candidates;
  /// Probes whose text already occurred earlier in the set (kept, not removed).
  std::size_t duplicate_probes = 0;
};

/// The artificial probing set: all samples extracted from generations
/// conditioned on each candidate, in candidate order, with labels dropped.
struct ProbingSet {
  std::vector<Probe> probes;
  /// Source candidate index per probe.
  std::vector<std::size_t> provenance;
  ProbingDiagnostics diagnostics;

  std::size_t size() const noexcept { return probes.size(); }
};

struct ProbingOptions {
  GenParams generation;
  /// Generations sampled per candidate.
  std::size_t generations_per_candidate = 1;
  std::size_t parallelism = 1;
};

/// Samples g_m from each candidate context (c_m followed by the sample
/// separator, so the model opens a new sample), extracts complete samples and
/// keeps their inputs. Generation r of candidate m uses the seed
/// derive_seed(generation.seed or 0, "probe", m * R + r).
/// Throws Error(empty_probing_set) when nothing could be extracted.
ProbingSet build_probing_set(std::span<const PromptCandidate> candidates,
                             LanguageModel& backend, const PromptTemplate& tpl,
                             const ProbingOptions& options);

/// Probe as an example with a placeholder label, for T(x) rendering.
LabeledExample probe_example(const Probe& probe);

/// One JSON object per line: {"candidate": m, "text": ..., ["text_b": ...]}.
std::string probing_set_to_jsonl(const ProbingSet& set);

}  // namespace ordprobe
