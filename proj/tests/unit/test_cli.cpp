/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "loopcost/cli.hpp"
#include "loopcost/error.hpp"
#include "loopcost/json_util.hpp"
#include "loopcost/report.hpp"
#include "test_support.hpp"

namespace loopcost {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("loopcost_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    json_util::write_file(tmp(name), text);
    return tmp(name);
  }

  const std::string mm = test::fixture("programs/matmul.json");
  const std::string two_mm = test::fixture("programs/2mm.json");
  const std::string space = test::fixture("spaces/matmul64.json");

 private:
  fs::path dir_;
};

TEST_F(CliTest, AnalyzeReportsCpuFeatures) {
  const CliRun r = cli({"analyze", two_mm, "--arch", "x86-avx2", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  EXPECT_EQ(rep.command, "analyze");
  EXPECT_EQ(rep.program, "2mm");
  ASSERT_EQ(rep.candidates.size(), 1u);
  const auto& f = rep.candidates[0].features;
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[3].first, "est_l1_movement");
  EXPECT_TRUE(rep.candidates[0].score.has_value());
  EXPECT_FALSE(rep.elapsed_seconds.has_value());
}

TEST_F(CliTest, AnalyzeHumanTable) {
  const CliRun r = cli({"analyze", two_mm});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("est_l1_movement"), std::string::npos);
  EXPECT_NE(r.out.find("score"), std::string::npos);
}

TEST_F(CliTest, AnalyzeWithSchedule) {
  const std::string s = write("s.json", R"([{"kind": "tile", "loop": "i", "factor": 8}])");
  const CliRun r = cli({"analyze", mm, "--schedule", s, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_report(r.out).candidates[0].schedule.size(), 1u);
}

TEST_F(CliTest, MissingFileIsUserError) {
  const CliRun r = cli({"analyze", tmp("nope.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST_F(CliTest, MalformedProgramIsUserError) {
  EXPECT_EQ(cli({"analyze", write("bad.json", "{\"tensors\": [}")}).code, 1);
}

TEST_F(CliTest, EmitOnlyWritesCode) {
  const CliRun r = cli({"analyze", mm, "--emit-only", "--target", "aarch64"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("b.ne"), std::string::npos);
  EXPECT_EQ(r.out.find("est_l1_movement"), std::string::npos);
  const std::string out = tmp("code.s");
  ASSERT_EQ(cli({"analyze", mm, "--emit-only", "--out", out}).code, 0);
  EXPECT_NE(json_util::read_file(out).find("vfmadd"), std::string::npos);
}

TEST_F(CliTest, AnalyzeExternalCode) {
  const std::string code = tmp("mm.s");
  ASSERT_EQ(cli({"emit", mm, "--out", code}).code, 0);
  const CliRun a = cli({"analyze", mm, "--code", code, "--json"});
  const CliRun b = cli({"analyze", mm, "--json"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, GpuAnalysis) {
  const std::string launch = test::fixture("launch/matmul_gpu.json");
  EXPECT_EQ(cli({"analyze", mm, "--arch", "nvidia-volta"}).code, 1);  // no launch record
  const CliRun r = cli({"analyze", mm, "--target", "ptx", "--launch", launch, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_report(r.out).candidates[0].features.size(), 7u);
  const std::string info = write("ptxas.txt", "ptxas info    : Used 255 registers, 0 bytes smem\n");
  const CliRun heavy = cli({"analyze", mm, "--target", "ptx", "--launch", launch, "--ptxas-info", info, "--json"});
  ASSERT_EQ(heavy.code, 0) << heavy.err;
  EXPECT_GT(*load_report(heavy.out).candidates[0].score, *load_report(r.out).candidates[0].score);
}

TEST_F(CliTest, TargetMustMatchArch) {
  EXPECT_EQ(cli({"analyze", mm, "--arch", "x86-avx2", "--target", "aarch64"}).code, 1);
  EXPECT_EQ(cli({"analyze", mm, "--arch", "no-such"}).code, 1);
  EXPECT_EQ(cli({"analyze", mm, "--target", "sparc"}).code, 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"analyze"}).code, 1);
  EXPECT_EQ(cli({"analyze", mm, "--no-such-flag"}).code, 1);
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("search"), std::string::npos);
}

TEST_F(CliTest, SearchSingleScheduleSpace) {
  const CliRun r = cli({"search", mm, test::fixture("spaces/single.json"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  ASSERT_TRUE(rep.best.has_value());
  EXPECT_EQ(rep.best->schedule, (Schedule{Tile{"i", 8}}));
  EXPECT_EQ(rep.evaluations, 1);
}

TEST_F(CliTest, SearchSeedIsReproducible) {
  const std::vector<std::string> args = {"search", mm, space, "--seed", "17", "--json"};
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  std::vector<std::string> jobs = args;
  jobs.insert(jobs.end(), {"--jobs", "3"});
  EXPECT_EQ(cli(jobs).out, a.out);
}

TEST_F(CliTest, SearchTopK) {
  const CliRun r = cli({"search", mm, space, "--top-k", "10", "--json", "--iterations", "30"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  ASSERT_EQ(rep.candidates.size(), 10u);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
    distinct.insert(schedule_to_string(rep.candidates[i].schedule));
    if (i > 0) {
      EXPECT_LE(*rep.candidates[i - 1].score, *rep.candidates[i].score);
    }
  }
  EXPECT_EQ(distinct.size(), 10u);
  EXPECT_EQ(rep.best->schedule, rep.candidates[0].schedule);
}

TEST_F(CliTest, SearchTraceAndConfig) {
  const std::string trace = tmp("trace.csv");
  const std::string cfg = write("search.toml", "[search]\niterations = 5\npopulation = 8\nseed = 2\n");
  const CliRun r = cli({"search", mm, space, "--search-config", cfg, "--trace", trace, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_report(r.out).trace.size(), 5u);
  const std::string csv = json_util::read_file(trace);
  EXPECT_EQ(csv.rfind("iteration,best_score\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  // Flags override the file.
  EXPECT_EQ(load_report(cli({"search", mm, space, "--search-config", cfg, "--iterations", "3", "--json"}).out).trace.size(), 3u);
  EXPECT_EQ(cli({"search", mm, space, "--search-config", write("bad.toml", "[search]\nlearning = 1\n")}).code, 1);
  EXPECT_EQ(cli({"search", mm, space, "--population", "7"}).code, 1);
}

TEST_F(CliTest, SearchWritesReportFile) {
  const std::string out = tmp("report.json");
  const CliRun r = cli({"search", mm, space, "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("best score"), std::string::npos);
  EXPECT_EQ(load_report(json_util::read_file(out)).command, "search");
}

TEST_F(CliTest, RankThreeSchedules) {
  const CliRun r = cli({"rank", mm, test::fixture("schedules/three.json"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  ASSERT_EQ(rep.candidates.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_LE(*rep.candidates[i - 1].score, *rep.candidates[i].score);
}

TEST_F(CliTest, RankDuplicatesStayAdjacentInInputOrder) {
  const CliRun r = cli({"rank", mm, test::fixture("schedules/duplicates.json"), "--json", "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  std::vector<std::size_t> order;
  for (const auto& c : rep.candidates) order.push_back(c.index);
  // Schedules 0 and 2 are identical and must be adjacent with 0 first.
  const auto p0 = std::find(order.begin(), order.end(), 0u), p2 = std::find(order.begin(), order.end(), 2u);
  EXPECT_EQ(p2 - p0, 1);
}

TEST_F(CliTest, RankEmptyListFails) { EXPECT_EQ(cli({"rank", mm, test::fixture("schedules/empty.json")}).code, 1); }

TEST_F(CliTest, RankListsFailuresLast) {
  const std::string s = write("mixed.json", R"([[{"kind": "tile", "loop": "i", "factor": 5}], []])");
  const CliRun r = cli({"rank", mm, s, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunReport rep = load_report(r.out);
  ASSERT_EQ(rep.candidates.size(), 2u);
  EXPECT_TRUE(rep.candidates[0].score.has_value());
  EXPECT_FALSE(rep.candidates[1].score.has_value());
  EXPECT_FALSE(rep.candidates[1].error.empty());
  EXPECT_EQ(rep.diagnostics.size(), 1u);
}

TEST_F(CliTest, FitPrintsCoefficients) {
  std::string csv = "n_fma,n_vload,n_vstore,est_l1_movement,ilp_cycles,latency\n";
  const double rows[6][5] = {{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}, {1, 1, 1, 1, 1}};
  const double coef[5] = {0.5, 1, 2, 4, 1};
  for (const auto& row : rows) {
    double lat = 0;
    for (int k = 0; k < 5; ++k) {
      csv += std::to_string(row[k]) + ",";
      lat += row[k] * coef[k];
    }
    csv += std::to_string(lat) + "\n";
  }
  const CliRun r = cli({"fit", write("samples.csv", csv), "--arch", "x86-avx2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("[coefficients]\n", 0), 0u);
  EXPECT_NE(r.out.find("est_l1_movement = 4\n"), std::string::npos);
}

TEST(Report, RoundTrip) {
  RunReport r;
  r.command = "search";
  r.program = "p";
  r.arch = "x86-avx2";
  r.target = "x86";
  CandidateRecord c;
  c.index = 2;
  c.schedule = {Tile{"i", 4}, Vectorize{"i_i", 4}};
  c.features = {{"z", 1.5}, {"a", 0.1}};
  c.score = 0.30000000000000004;
  r.candidates.push_back(c);
  CandidateRecord failed;
  failed.index = 3;
  failed.error = "bad";
  r.candidates.push_back(failed);
  r.best = c;
  r.trace = {std::numeric_limits<double>::infinity(), 3.25, 1e-300};
  r.evaluations = 12;
  r.diagnostics = {"note"};
  EXPECT_EQ(load_report(save_report(r)), r);
  r.elapsed_seconds = 0.5;
  EXPECT_EQ(load_report(save_report(r)), r);
  EXPECT_EQ(save_report(load_report(save_report(r))), save_report(r));
  EXPECT_THROW(load_report("{\"command\": 1}"), Error);
  EXPECT_THROW(load_report("{"), ParseError);
}

TEST(Binary, ExitCodes) {
  const std::string bin = LOOPCOST_CLI_PATH;
  EXPECT_EQ(std::system((bin + " --help > /dev/null").c_str()), 0);
  const int rc = std::system((bin + " analyze /nonexistent.json 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(rc));
  EXPECT_EQ(WEXITSTATUS(rc), 1);
}

}  // namespace
}  // namespace loopcost
