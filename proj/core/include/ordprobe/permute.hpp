#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ordprobe/dataset.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe {

/// A permutation of train-set sample indices 0..n-1.
using Ordering = std::vector<std::size_t>;

/// All n! orderings in lexicographic order when n! <= cap; otherwise `cap`
/// distinct orderings drawn uniformly (Fisher-Yates with rejection of
/// duplicates), deterministic in seed.
std::vector<Ordering> enumerate_orderings(std::size_t n, std::size_t cap,
                                          std::uint64_t seed);

/// One letter per label: the upper-cased initial when initials are unique
/// (negative/positive -> N/P), otherwise A, B, C, ...
std::vector<std::string> label_symbols(const std::vector<std::string>& label_names);

std::string label_pattern(const TrainSet& ts, const Ordering& ordering,
                          const std::vector<std::string>& symbols);

/// Groups orderings by the label sequence they induce.
std::map<std::string, std::vector<Ordering>> label_patterns(
    const TrainSet& ts, std::span<const Ordering> orderings,
    const std::vector<std::string>& label_names);

/// One ordering of the train set rendered to prompt context c_m.
struct PromptCandidate {
  std::size_t index = 0;
  Ordering ordering;
  std::string context;
  std::string label_pattern;
};

std::vector<PromptCandidate> render_candidates(
    const TrainSet& ts, const PromptTemplate& tpl,
    std::span<const Ordering> orderings,
    const std::vector<std::string>& label_names);

/// Groups (size >= 2) of candidate indices whose contexts are identical.
std::vector<std::vector<std::size_t>> duplicate_contexts(
    std::span<const PromptCandidate> candidates);

std::string ordering_to_string(const Ordering& ordering);

}  // namespace ordprobe
