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

#include <random>

#include "../oracles/oracles.hpp"
#include "loopcost/arch_spec.hpp"
#include "loopcost/config.hpp"
#include "loopcost/cost_model.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/error.hpp"
#include "test_support.hpp"

namespace loopcost {
namespace {

ArchSpec two_feature_arch(double a0, double a1) {
  ArchSpec a;
  a.name = "toy";
  a.coefficients = {{"f0", a0}, {"f1", a1}};
  return a;
}

FeatureVector fv2(double f0, double f1) {
  FeatureVector v({"f0", "f1"});
  v.set("f0", f0);
  v.set("f1", f1);
  return v;
}

TEST(ExtractFeatures, CpuPipelinePopulatesAllFeatures) {
  const ArchSpec arch = load_arch_spec("x86-avx2");
  const LoopProgram p = test::fixture_program("matmul");
  const FeatureReport r = extract_features(p, emit_mock_code(p, Target::kX86), arch);
  ASSERT_EQ(r.features.size(), cpu_feature_names().size());
  for (const auto& n : cpu_feature_names()) {
    EXPECT_TRUE(r.features.has(n)) << n;
    EXPECT_GT(r.features.get(n), 0) << n;
  }
  EXPECT_EQ(r.features.get("n_fma"), 64 * 64 * 64);
}

TEST(ExtractFeatures, EmptyProgramIsAllZero) {
  const LoopProgram p = parse_program(R"({"tensors": [], "body": []})");
  for (const char* name : {"x86-avx2", "aarch64-neon"}) {
    const ArchSpec arch = load_arch_spec(name);
    const FeatureReport r = extract_features(p, emit_mock_code(p, arch.target), arch);
    for (const auto& [n, v] : r.features.entries()) EXPECT_EQ(v, 0) << name << " " << n;
    EXPECT_EQ(score(r.features, arch), 0);
  }
}

TEST(ExtractFeatures, GpuNeedsLaunchRecord) {
  const ArchSpec arch = load_arch_spec("nvidia-volta");
  const LoopProgram p = test::fixture_program("matmul");
  const std::string ptx = emit_mock_code(p, Target::kPtx);
  EXPECT_THROW(extract_features(p, ptx, arch), Error);
  const KernelLaunch launch{64, 64, 32, 0};
  const FeatureReport r = extract_features(p, ptx, arch, &launch);
  EXPECT_EQ(r.features.size(), gpu_feature_names().size());
}

TEST(ExtractFeatures, CodeMustMatchFamily) {
  const LoopProgram p = test::fixture_program("matmul");
  EXPECT_THROW(extract_features(p, emit_mock_code(p, Target::kPtx), load_arch_spec("x86-avx2")), Error);
}

TEST(Score, ZeroFeatures) { EXPECT_EQ(score(fv2(0, 0), two_feature_arch(1.5, 2)), 0); }

TEST(Score, WeightedSum) { EXPECT_DOUBLE_EQ(score(fv2(2, 3), two_feature_arch(1.5, 2)), 9.0); }

TEST(Score, LinearInCoefficientsAndFeatures) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 100; ++trial) {
    const double a0 = u(rng), a1 = u(rng), c = 0.5 + u(rng);
    const FeatureVector x = fv2(u(rng), u(rng)), y = fv2(u(rng), u(rng));
    const ArchSpec arch = two_feature_arch(a0, a1);
    EXPECT_NEAR(score(x, two_feature_arch(c * a0, c * a1)), c * score(x, arch), 1e-9 * c * score(x, arch));
    EXPECT_NEAR(score(x + y, arch), score(x, arch) + score(y, arch), 1e-9 * score(x + y, arch));
  }
}

TEST(Score, MissingCoefficientIsAnError) {
  FeatureVector v({"f2"});
  EXPECT_THROW(score(v, two_feature_arch(1, 1)), Error);
}

TEST(Rank, Order) {
  EXPECT_EQ(rank_order({3, 1, 2}), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(rank_order({5, 5, 5}), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(rank_order({7}), (std::vector<std::size_t>{0}));
}

TEST(Rank, Candidates) {
  const ArchSpec arch = two_feature_arch(1, 1);
  const std::vector<Candidate> c = {{{}, fv2(3, 0)}, {{}, fv2(1, 0)}, {{}, fv2(0, 2)}, {{}, fv2(1, 0)}};
  const auto r = rank(c, arch);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_EQ(r[1].index, 3u);  // tie keeps input order
  EXPECT_EQ(r[2].index, 2u);
  EXPECT_EQ(r[3].index, 0u);
  EXPECT_EQ(r[3].score, 3);
  EXPECT_THROW(rank({}, arch), Error);
}

TEST(Rank, PositiveScalingKeepsOrder) {
  const ArchSpec base = load_arch_spec("x86-avx2");
  ArchSpec scaled = base;
  for (auto& [n, a] : scaled.coefficients) a *= 3.7;
  std::vector<Candidate> cands;
  const LoopProgram p = test::fixture_program("matmul");
  const SearchSpace space = parse_space(json_util::read_file(test::fixture("spaces/matmul64.json")), p);
  for (const auto& s : enumerate_space(p, space)) cands.push_back({s, evaluate_schedule(p, s, base).features});
  const auto a = rank(cands, base), b = rank(cands, scaled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
}

TEST(Rank, Deterministic) {
  const ArchSpec arch = load_arch_spec("aarch64-neon");
  const LoopProgram p = test::fixture_program("2mm");
  const Schedule s = {Tile{"k", 8}};
  const FeatureReport a = evaluate_schedule(p, s, arch), b = evaluate_schedule(p, s, arch);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(score(a.features, arch), score(b.features, arch));
}

TEST(Fit, RecoversPlantedCoefficients) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<FitSample> samples;
  for (int i = 0; i < 40; ++i) {
    FitSample s{fv2(u(rng), u(rng)), 0};
    s.latency = 1.25 * s.features.get("f0") + 4.5 * s.features.get("f1");
    samples.push_back(s);
  }
  const FitResult r = fit_coefficients(samples, {"f0", "f1"});
  ASSERT_EQ(r.coefficients.size(), 2u);
  EXPECT_NEAR(r.coefficients[0].second, 1.25, 1e-9);
  EXPECT_NEAR(r.coefficients[1].second, 4.5, 1e-9);
  EXPECT_NEAR(r.rms_residual, 0, 1e-9);
  EXPECT_THROW(fit_coefficients({samples[0]}, {"f0", "f1"}), Error);
}

TEST(Fit, CsvParsing) {
  const auto s = parse_fit_csv("f0,f1,latency\n1,2,3\n4,5,6\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].features.get("f1"), 5);
  EXPECT_EQ(s[1].latency, 6);
  EXPECT_THROW(parse_fit_csv("f0,f1\n1,2\n"), Error);
  EXPECT_THROW(parse_fit_csv("f0,latency\n1,x\n"), Error);
}

TEST(Config, ParsesSubset) {
  const auto d = config::Document::Parse(
      "# header\ntop = 1\n[meta]\nname = \"x\"  # trailing\n[ilp.latency]\nfma = 4\n\"ld.global\" = 2.5\nflag = true\n");
  EXPECT_EQ(d.get_int("", "top"), 1);
  EXPECT_EQ(d.get_string("meta", "name"), "x");
  EXPECT_EQ(d.get_int("ilp.latency", "fma"), 4);
  EXPECT_EQ(d.get_number("ilp.latency", "ld.global"), 2.5);
  EXPECT_TRUE(d.get_bool("ilp.latency", "flag"));
  EXPECT_EQ(d.keys("ilp.latency"), (std::vector<std::string>{"fma", "ld.global", "flag"}));
  EXPECT_EQ(d.get_int("meta", "missing", 7), 7);
  EXPECT_THROW(d.get_int("meta", "name"), Error);
}

TEST(Config, Errors) {
  EXPECT_THROW(config::Document::Parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(config::Document::Parse("[s]\n[s]\n"), ParseError);
  EXPECT_THROW(config::Document::Parse("[[s]]\n"), ParseError);
  try {
    config::Document::Parse("[ok]\nx = \n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ArchSpec, Builtins) {
  EXPECT_EQ(builtin_arch_names(), (std::vector<std::string>{"x86-avx2", "aarch64-neon", "nvidia-volta"}));
  const ArchSpec x86 = load_arch_spec("x86-avx2");
  EXPECT_EQ(x86.family, Family::kCpu);
  EXPECT_EQ(x86.cache().capacity, 8192);
  EXPECT_EQ(x86.ilp.issue_width, 4);
  EXPECT_EQ(x86.coefficient("est_l1_movement"), 4.0);
  const ArchSpec gpu = load_arch_spec("nvidia-volta");
  EXPECT_EQ(gpu.family, Family::kGpu);
  EXPECT_EQ(gpu.gpu.num_sms, 80);
  EXPECT_EQ(default_arch_for(Target::kAArch64), "aarch64-neon");
  EXPECT_THROW(load_arch_spec("no-such-arch"), Error);
}

TEST(ArchSpec, LoadsFromFile) {
  const ArchSpec a = load_arch_spec(std::string(LOOPCOST_FIXTURES_DIR) + "/../configs/aarch64-neon.toml");
  EXPECT_EQ(a.name, "aarch64-neon");
  EXPECT_EQ(a.target, Target::kAArch64);
}

TEST(ArchSpec, MissingCoefficientRejected) {
  EXPECT_THROW(parse_arch_spec("[meta]\nname = \"t\"\nfamily = \"cpu\"\ntarget = \"x86\"\n"
                               "[coefficients]\nn_fma = 1\n[cache]\nl1_capacity_bytes = 1024\n"),
               Error);
}

}  // namespace
}  // namespace loopcost
