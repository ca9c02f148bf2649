#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "ordprobe/permute.hpp"
#include "support.hpp"

namespace ordprobe {
namespace {

using testing::ex;

bool is_permutation_of_iota(const Ordering& o) {
  Ordering sorted = o;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) return false;
  }
  return true;
}

TrainSet train_set(std::vector<LabelId> labels) {
  TrainSet ts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ts.samples.push_back(ex(std::to_string(i), "sample " + std::to_string(i), labels[i]));
  }
  return ts;
}

TEST(EnumerateOrderings, AllPermutationsInLexicographicOrder) {
  const auto all = enumerate_orderings(4, 24, 0);
  ASSERT_EQ(all.size(), 24u);
  EXPECT_EQ(all.front(), (Ordering{0, 1, 2, 3}));
  EXPECT_EQ(all.back(), (Ordering{3, 2, 1, 0}));
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_EQ(enumerate_orderings(1, 24, 0), (std::vector<Ordering>{{0}}));
}

TEST(EnumerateOrderings, SampledWhenFactorialExceedsCap) {
  for (std::size_t n : {5u, 8u, 16u, 64u}) {
    const auto got = enumerate_orderings(n, 24, 7);
    ASSERT_EQ(got.size(), 24u);
    std::set<Ordering> distinct(got.begin(), got.end());
    EXPECT_EQ(distinct.size(), 24u);
    for (const auto& o : got) EXPECT_TRUE(is_permutation_of_iota(o));
    EXPECT_EQ(got, enumerate_orderings(n, 24, 7));
  }
  EXPECT_NE(enumerate_orderings(8, 24, 1), enumerate_orderings(8, 24, 2));
}

TEST(EnumerateOrderings, CapAboveFactorialGivesAll) {
  EXPECT_EQ(enumerate_orderings(3, 1000, 0).size(), 6u);
  EXPECT_EQ(enumerate_orderings(5, 120, 0).size(), 120u);
}

TEST(LabelPatterns, BalancedBinaryGivesSixPatterns) {
  const auto ts = train_set({0, 0, 1, 1});
  const auto orderings = enumerate_orderings(4, 24, 0);
  const auto patterns = label_patterns(ts, orderings, {"negative", "positive"});
  std::set<std::string> keys;
  for (const auto& [k, v] : patterns) {
    keys.insert(k);
    EXPECT_EQ(v.size(), 4u);
  }
  EXPECT_EQ(keys, (std::set<std::string>{"NNPP", "NPNP", "NPPN", "PNNP", "PNPN", "PPNN"}));
}

TEST(LabelPatterns, MultisetCounts) {
  const auto orderings = enumerate_orderings(3, 24, 0);
  EXPECT_EQ(label_patterns(train_set({1, 0, 0}), orderings, {"negative", "positive"}).size(), 3u);
  EXPECT_EQ(label_patterns(train_set({1, 1, 1}), orderings, {"negative", "positive"}).size(), 1u);
}

TEST(LabelSymbols, InitialsOrLetters) {
  EXPECT_EQ(label_symbols({"negative", "positive"}), (std::vector<std::string>{"N", "P"}));
  EXPECT_EQ(label_symbols({"good", "great"}), (std::vector<std::string>{"A", "B"}));
}

TEST(RenderCandidates, OnePerOrdering) {
  const auto ts = train_set({0, 1, 0, 1});
  const auto& tpl = preset_template("sst2");
  const auto orderings = enumerate_orderings(4, 24, 0);
  const auto cands = render_candidates(ts, tpl, orderings, {"negative", "positive"});
  ASSERT_EQ(cands.size(), 24u);
  std::set<std::string> contexts;
  for (std::size_t m = 0; m < cands.size(); ++m) {
    EXPECT_EQ(cands[m].index, m);
    EXPECT_EQ(cands[m].ordering, orderings[m]);
    contexts.insert(cands[m].context);
  }
  EXPECT_EQ(contexts.size(), 24u);
  std::vector<std::string> parts;
  for (const auto& x : ts.samples) parts.push_back(linearize(x, true, tpl));
  EXPECT_EQ(cands[0].context, concat(parts, tpl));
  EXPECT_EQ(cands[0].label_pattern, "NPNP");
  EXPECT_TRUE(duplicate_contexts(cands).empty());
}

TEST(RenderCandidates, IdenticalTextsAreFlaggedAsDuplicates) {
  TrainSet ts;
  ts.samples = {ex("a", "same text", 0), ex("b", "same text", 0), ex("c", "other", 1)};
  const auto orderings = enumerate_orderings(3, 24, 0);
  const auto cands = render_candidates(ts, preset_template("sst2"), orderings,
                                       {"negative", "positive"});
  const auto dups = duplicate_contexts(cands);
  EXPECT_EQ(dups.size(), 3u);
  for (const auto& g : dups) EXPECT_EQ(g.size(), 2u);
}

TEST(OrderingToString, SpaceSeparated) {
  EXPECT_EQ(ordering_to_string({2, 0, 1}), "2 0 1");
}

}  // namespace
}  // namespace ordprobe
