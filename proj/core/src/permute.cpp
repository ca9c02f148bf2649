#include "ordprobe/permute.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <unordered_map>

#include "ordprobe/error.hpp"
#include "ordprobe/rng.hpp"

namespace ordprobe {
namespace {

// n! when it does not exceed `limit`, otherwise limit + 1.
std::size_t factorial_capped(std::size_t n, std::size_t limit) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (f > limit / i) return limit + 1;
    f *= i;
  }
  return f;
}

}  // namespace

std::vector<Ordering> enumerate_orderings(std::size_t n, std::size_t cap,
                                          std::uint64_t seed) {
  if (n == 0 || cap == 0) {
    throw Error(ErrorKind::config, "enumerate_orderings needs n >= 1, cap >= 1");
  }
  Ordering identity(n);
  std::iota(identity.begin(), identity.end(), 0);

  std::vector<Ordering> out;
  if (factorial_capped(n, cap) <= cap) {
    Ordering p = identity;
    do {
      out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
  }

  Rng rng(derive_seed(seed, "orderings"));
  std::set<Ordering> seen;
  const std::size_t max_draws = 1000 * cap + 1000;
  for (std::size_t draws = 0; out.size() < cap; ++draws) {
    if (draws == max_draws) {
      throw Error(ErrorKind::config, "could not draw distinct orderings");
    }
    Ordering p = identity;
    rng.shuffle(std::span(p));
    if (seen.insert(p).second) out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> label_symbols(
    const std::vector<std::string>& label_names) {
  std::vector<std::string> out;
  std::set<char> initials;
  bool unique = true;
  for (const auto& name : label_names) {
    const char c = name.empty()
                       ? '?'
                       : static_cast<char>(std::toupper(
                             static_cast<unsigned char>(name.front())));
    unique = unique && std::isalnum(static_cast<unsigned char>(c)) &&
             initials.insert(c).second;
    out.emplace_back(1, c);
  }
  if (unique) return out;

  out.clear();
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    out.push_back(i < 26 ? std::string(1, static_cast<char>('A' + i))
                         : "[" + std::to_string(i) + "]");
  }
  return out;
}

std::string label_pattern(const TrainSet& ts, const Ordering& ordering,
                          const std::vector<std::string>& symbols) {
  std::string out;
  for (auto i : ordering) {
    const auto label = ts.samples.at(i).label;
    out += label < symbols.size() ? symbols[label] : "?";
  }
  return out;
}

std::map<std::string, std::vector<Ordering>> label_patterns(
    const TrainSet& ts, std::span<const Ordering> orderings,
    const std::vector<std::string>& label_names) {
  const auto symbols = label_symbols(label_names);
  std::map<std::string, std::vector<Ordering>> groups;
  for (const auto& o : orderings) {
    groups[label_pattern(ts, o, symbols)].push_back(o);
  }
  return groups;
}

std::vector<PromptCandidate> render_candidates(
    const TrainSet& ts, const PromptTemplate& tpl,
    std::span<const Ordering> orderings,
    const std::vector<std::string>& label_names) {
  std::vector<std::string> rendered;
  rendered.reserve(ts.shots());
  for (const auto& s : ts.samples) rendered.push_back(linearize(s, true, tpl));

  const auto symbols = label_symbols(label_names);
  std::vector<PromptCandidate> out;
  out.reserve(orderings.size());
  for (std::size_t m = 0; m < orderings.size(); ++m) {
    const auto& o = orderings[m];
    if (o.size() != ts.shots()) {
      throw Error(ErrorKind::config, "ordering size does not match train set");
    }
    std::vector<std::string> parts;
    parts.reserve(o.size());
    for (auto i : o) parts.push_back(rendered.at(i));
    out.push_back(PromptCandidate{m, o, concat(parts, tpl),
                                  label_pattern(ts, o, symbols)});
  }
  return out;
}

std::vector<std::vector<std::size_t>> duplicate_contexts(
    std::span<const PromptCandidate> candidates) {
  std::unordered_map<std::string_view, std::vector<std::size_t>> groups;
  std::vector<std::string_view> first_seen;
  for (const auto& c : candidates) {
    auto& g = groups[c.context];
    if (g.empty()) first_seen.push_back(c.context);
    g.push_back(c.index);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto key : first_seen) {
    if (groups[key].size() > 1) out.push_back(groups[key]);
  }
  return out;
}

std::string ordering_to_string(const Ordering& ordering) {
  std::string out;
  for (std::size_t i = 0; i < ordering.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(ordering[i]);
  }
  return out;
}

}  // namespace ordprobe
