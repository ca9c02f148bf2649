#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "ordprobe/mock_backend.hpp"
#include "ordprobe/permute.hpp"
#include "ordprobe/probing.hpp"
#include "ordprobe/scoring.hpp"
#include "ordprobe/template.hpp"

using namespace ordprobe;

namespace {

LabeledExample sample(std::size_t i, LabelId label) {
  static const std::vector<std::string> words = {"great", "dull", "film", "script", "warm",
                                                 "boring", "the", "cast"};
  std::string text;
  for (std::size_t w = 0; w < 6; ++w) {
    if (w) text += ' ';
    text += words[(i * 7 + w * 3) % words.size()];
  }
  return {"s" + std::to_string(i), text, std::nullopt, label};
}

MockConfig mock_config() {
  MockConfig c;
  c.keywords = {{"dull", "boring"}, {"great", "warm"}};
  c.recency_bias = 1.0;
  c.context_keyword_weight = 0.2;
  c.sample_template = preset_template("sst2");
  return c;
}

void BM_GlobalEntropy(benchmark::State& state) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(global_entropy(hist));
}
BENCHMARK(BM_GlobalEntropy)->Arg(2)->Arg(14);

void BM_EnumerateOrderings(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_orderings(n, 24, 7));
}
BENCHMARK(BM_EnumerateOrderings)->Arg(4)->Arg(8)->Arg(16);

void BM_Extract(benchmark::State& state) {
  const auto& tpl = preset_template("sst2");
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    parts.push_back(linearize(sample(i, i % 2), true, tpl));
  }
  const auto text = concat(parts, tpl);
  for (auto _ : state) benchmark::DoNotOptimize(extract(text, tpl));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Extract)->Arg(4)->Arg(64);

// 24 candidates x 48 probes against the mock backend.
void BM_ScoreCandidates(benchmark::State& state) {
  const auto& tpl = preset_template("sst2");
  TrainSet ts{{sample(0, 0), sample(1, 1), sample(2, 0), sample(3, 1)}, 1};
  const auto candidates =
      render_candidates(ts, tpl, enumerate_orderings(4, 24, 0), {"negative", "positive"});
  ProbingSet probes;
  for (std::size_t i = 0; i < 48; ++i) {
    probes.probes.push_back(Probe{sample(i + 10, 0).text_a, std::nullopt});
    probes.provenance.push_back(i % 24);
  }
  MockBackend mock(mock_config());
  ScoringOptions opts;
  opts.parallelism = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_candidates(candidates, probes, mock, tpl, opts));
  }
}
BENCHMARK(BM_ScoreCandidates)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_BuildProbingSet(benchmark::State& state) {
  const auto& tpl = preset_template("sst2");
  TrainSet ts{{sample(0, 0), sample(1, 1), sample(2, 0), sample(3, 1)}, 1};
  const auto candidates =
      render_candidates(ts, tpl, enumerate_orderings(4, 24, 0), {"negative", "positive"});
  auto config = mock_config();
  for (std::size_t i = 0; i < 32; ++i) config.corpus.push_back(sample(i, i % 2));
  MockBackend mock(config);
  ProbingOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(build_probing_set(candidates, mock, tpl, opts));
}
BENCHMARK(BM_BuildProbingSet)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
