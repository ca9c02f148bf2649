#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "ordprobe/artifacts.hpp"
#include "ordprobe/error.hpp"
#include "ordprobe/experiment.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace ordprobe {
namespace {

const fs::path kFixture = fs::path(ORDPROBE_FIXTURES) / "replay";
const fs::path kConfig = kFixture / "config.json";

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ORDPROBE_CLI + "\" -q " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli_to(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = std::string("\"") + ORDPROBE_CLI + "\" -q " + args + " > \"" +
                          stdout_file.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

TEST(ExperimentConfig, DefaultsAndShotsByDataset) {
  const auto spec = parse_experiment(
      R"({"dataset": {"path": "a.jsonl", "name": "agnews"}, "template": "agnews"})");
  EXPECT_EQ(spec.run.shots, 2u);
  EXPECT_EQ(spec.run.num_train_sets, 5u);
  EXPECT_EQ(spec.run.top_k, 4u);
  EXPECT_EQ(spec.run.max_permutations, 24u);
  EXPECT_EQ(spec.run.eval_subsample, 256u);
  EXPECT_EQ(spec.generation.temperature, 2.0);
  EXPECT_EQ(spec.generation.max_new_tokens, 128u);
  EXPECT_EQ(spec.cache_mode, CacheSetting::live);
  EXPECT_EQ(spec.std_kind, StdKind::population);

  const auto explicit_shots = parse_experiment(
      R"({"dataset": {"path": "a.jsonl", "name": "dbpedia"}, "template": "dbpedia",
          "run": {"shots": 3}})");
  EXPECT_EQ(explicit_shots.run.shots, 3u);
}

TEST(ExperimentConfig, RejectsBadInput) {
  auto kind_of = [](const std::string& text) {
    try {
      parse_experiment(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io;
  };
  EXPECT_EQ(kind_of(R"({"dataset": {"path": "a.jsonl"}, "template": "sst2", "extra": 1})"),
            ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"template": "sst2"})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"dataset": {"path": "a.jsonl"}, "template": "nope"})"),
            ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"dataset": {"path": "a.jsonl"}, "template": "sst2",
                        "backend": {"type": "gpt"}})"),
            ErrorKind::config);
  EXPECT_EQ(kind_of("{not json"), ErrorKind::config);
}

// Range checks run after command-line overrides, in validate().
TEST(ExperimentConfig, ValidateRejectsOutOfRangeValues) {
  auto spec = parse_experiment(R"({"dataset": {"path": "a.jsonl"}, "template": "sst2",
                                   "run": {"top_k": 0}})");
  EXPECT_THROW(spec.validate(), Error);
  spec.run.top_k = 4;
  EXPECT_NO_THROW(spec.validate());
  spec.cache_mode = CacheSetting::record;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(ExperimentConfig, HashIgnoresOperationalSettings) {
  const auto base = load_experiment(kConfig);
  EXPECT_EQ(base.config_hash(),
            "e934260a56011efa36be24f1a8ce144bafc859b2b419802e3efc67be41e098a1");
  auto other = base;
  other.cache_mode = CacheSetting::record;
  other.output_dir = "elsewhere";
  other.backend.parallelism = 8;
  other.cache_dir = "/tmp/other-cache";
  EXPECT_EQ(other.config_hash(), base.config_hash());
  other.run.seed = 4;
  EXPECT_NE(other.config_hash(), base.config_hash());
  auto temp = base;
  temp.generation.temperature = 1.0;
  EXPECT_NE(temp.config_hash(), base.config_hash());
}

TEST(OutputDir, RefusesForeignArtifactsWithoutForce) {
  testing::TempDir tmp;
  {
    OutputDir out(tmp.path(), "aaa", false);
    out.write("x.txt", "one");
  }
  EXPECT_EQ(testing::read_text(tmp / "x.txt"), "one");
  EXPECT_NO_THROW(OutputDir(tmp.path(), "aaa", false));
  try {
    OutputDir(tmp.path(), "bbb", false);
    FAIL() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
  {
    OutputDir forced(tmp.path(), "bbb", true);
    forced.write("y.txt", "two");
  }
  EXPECT_NE(testing::read_text(tmp / "manifest.json").find("bbb"), std::string::npos);
}

TEST(Artifacts, FormatDoubleRoundTrips) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Artifacts, ReportJsonRoundTrips) {
  const auto text = testing::read_text(kFixture / "golden" / "report.json");
  const auto report = parse_report_json(text);
  EXPECT_EQ(report.sets.size(), 2u);
  EXPECT_EQ(report_json(report), text);
  EXPECT_EQ(report_csv(report), testing::read_text(kFixture / "golden" / "report.csv"));
}

TEST(Pipeline, FourShotSelectionYieldsTwentyFourCandidates) {
  auto spec = load_experiment(kConfig);
  spec.run.shots = 4;
  spec.run.top_k = 4;
  spec.run.num_train_sets = 1;
  spec.cache_mode = CacheSetting::live;
  auto e = open_experiment(spec);
  const auto sets = run_select(e);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].candidates.size(), 24u);
  EXPECT_EQ(sets[0].scores.size(), 24u);
  EXPECT_EQ(sets[0].selected_global.size(), 4u);
  EXPECT_EQ(sets[0].selected_local.size(), 4u);
  EXPECT_GT(sets[0].probing.size(), 0u);
}

TEST(Pipeline, CorrelatesReportsOverSharedCandidates) {
  auto spec = load_experiment(kConfig);
  spec.cache_mode = CacheSetting::live;
  const std::vector<Strategy> all = {Strategy::all};
  auto e1 = open_experiment(spec);
  const auto r1 = run_evaluate(e1, {}, all);
  spec.backend.mock.seed = 12;
  spec.backend.mock.recency_bias = 2.5;
  spec.backend.mock.noise = 0.3;
  auto e2 = open_experiment(spec);
  const auto r2 = run_evaluate(e2, {}, all);
  const std::vector<RunReport> both = {r1, r2};
  const auto m = correlate_reports(both, false);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0][0], 1.0);
  EXPECT_EQ(m[0][1], m[1][0]);
  EXPECT_GE(m[0][1], -1.0);
  EXPECT_LE(m[0][1], 1.0);
  EXPECT_EQ(correlate_reports(both, true).size(), 2u);

  spec.run.seed = 77;
  auto e3 = open_experiment(spec);
  const std::vector<RunReport> mismatched = {r1, run_evaluate(e3, {}, all)};
  EXPECT_THROW(correlate_reports(mismatched, false), Error);
}

TEST(Cli, ReplayReproducesGoldenArtifacts) {
  testing::TempDir tmp;
  const auto out = tmp / "out";
  ASSERT_EQ(run_cli("select -c " + q(kConfig) + " --replay -o " + q(out)), 0);
  ASSERT_EQ(run_cli("evaluate -c " + q(kConfig) + " --replay -o " + q(out)), 0);
  for (const auto& entry : fs::directory_iterator(kFixture / "golden")) {
    const auto name = entry.path().filename();
    SCOPED_TRACE(name.string());
    ASSERT_TRUE(fs::exists(out / name));
    EXPECT_EQ(testing::read_text(out / name), testing::read_text(entry.path()));
  }
}

TEST(Cli, SweepAndReportReadStoredResults) {
  testing::TempDir tmp;
  const auto report = kFixture / "golden" / "report.json";
  ASSERT_EQ(run_cli_to("sweep --report " + q(report), tmp / "sweep.csv"), 0);
  EXPECT_EQ(testing::read_text(tmp / "sweep.csv"),
            testing::read_text(kFixture / "golden" / "sweep.csv"));
  ASSERT_EQ(run_cli_to("report --report " + q(report), tmp / "table.txt"), 0);
  EXPECT_NE(testing::read_text(tmp / "table.txt").find("globalE"), std::string::npos);
  ASSERT_EQ(run_cli_to("correlate --reports " + q(report) + " " + q(report), tmp / "corr.csv"),
            0);
  EXPECT_NE(testing::read_text(tmp / "corr.csv").find("1"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  testing::TempDir tmp;
  EXPECT_EQ(run_cli("select -c " + q(kConfig) + " --replay --shots 4 -o " + q(tmp / "o")), 4);
  testing::write_text(tmp / "bad.json", R"({"dataset": {"path": "x.jsonl"}, "bogus": true})");
  EXPECT_EQ(run_cli("select -c " + q(tmp / "bad.json")), 2);
  EXPECT_EQ(run_cli("select"), 2);
  EXPECT_EQ(run_cli("evaluate -c " + q(kConfig) + " -s nonsense -o " + q(tmp / "o2")), 2);
  EXPECT_EQ(run_cli("ingest " + q(fs::path(ORDPROBE_FIXTURES) / "sentiment" / "train.jsonl") +
                    " --template sst2"),
            0);
}

TEST(Cli, RecordThenReplayWithOverrides) {
  testing::TempDir tmp;
  const auto common = "-c " + q(kConfig) + " --shots 2 --sets 1 --eval-subsample 8 --cache-dir " +
                      q(tmp / "cache") + " -o " + q(tmp / "out");
  ASSERT_EQ(run_cli("select " + common + " --record"), 0);
  const auto first = testing::read_text(tmp / "out" / "scores.csv");
  ASSERT_EQ(run_cli("select " + common + " --replay"), 0);
  EXPECT_EQ(testing::read_text(tmp / "out" / "scores.csv"), first);
  // evaluate queries the eval set, which select never recorded.
  EXPECT_EQ(run_cli("evaluate " + common + " --replay"), 4);
  ASSERT_EQ(run_cli("evaluate " + common + " --record"), 0);
  const auto report = testing::read_text(tmp / "out" / "report.json");
  ASSERT_EQ(run_cli("evaluate " + common + " --replay"), 0);
  EXPECT_EQ(testing::read_text(tmp / "out" / "report.json"), report);
}

}  // namespace
}  // namespace ordprobe
