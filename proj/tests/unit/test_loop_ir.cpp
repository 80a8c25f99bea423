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

#include <algorithm>
#include <set>

#include "../oracles/oracles.hpp"
#include "loopcost/asm_analysis.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/error.hpp"
#include "loopcost/schedule.hpp"
#include "test_support.hpp"

namespace loopcost {
namespace {

std::vector<std::string> loop_vars(const LoopProgram& p) {
  std::vector<std::string> out;
  for (const auto& r : preorder_loops(p)) out.push_back(r.loop->var);
  return out;
}

TEST(ParseProgram, TwoMatrixMultiplyListing) {
  const LoopProgram p = test::fixture_program("2mm");
  EXPECT_EQ(loop_vars(p), (std::vector<std::string>{"it", "jt", "k", "i1", "j1", "l", "i2", "j2"}));
  std::set<std::string> tensors;
  for_each_access(p, [&](const AccessNode& a, const auto&) { tensors.insert(a.tensor); });
  EXPECT_EQ(tensors, (std::set<std::string>{"A", "B", "C", "D", "E"}));
  EXPECT_EQ(count_accesses(p), 8);
  EXPECT_EQ(find_loop(p, "it")->step, 8);
}

TEST(ParseProgram, EmptyLoopBodyHasNoAccesses) {
  const LoopProgram p = parse_program(R"({"tensors": [], "body": [{"loop": {"var": "i", "extent": 4, "body": []}}]})");
  EXPECT_EQ(count_accesses(p), 0);
  EXPECT_EQ(preorder_loops(p).size(), 1u);
}

TEST(ParseProgram, UnboundVariableIsRejected) {
  EXPECT_THROW(parse_program(R"({"tensors": [{"name": "A", "dims": [4]}],
    "body": [{"loop": {"var": "i", "extent": 4, "body": [
      {"access": {"tensor": "A", "kind": "load", "idx": ["j"]}}]}}]})"),
               Error);
}

TEST(ParseProgram, SyntaxErrorCarriesPosition) {
  try {
    parse_program("{\n  \"tensors\": [,]\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseProgram, RejectsSymbolicExtentAndOutOfBoundsIndex) {
  EXPECT_THROW(parse_program(R"({"tensors": [], "body": [{"loop": {"var": "i", "extent": "N"}}]})"), Error);
  EXPECT_THROW(parse_program(R"({"tensors": [{"name": "A", "dims": [4]}],
    "body": [{"loop": {"var": "i", "extent": 5, "body": [
      {"access": {"tensor": "A", "kind": "load", "idx": ["i"]}}]}}]})"),
               Error);
}

TEST(ParseProgram, SerializeRoundTripIsIdentity) {
  std::vector<LoopProgram> programs = {test::fixture_program("2mm"), test::fixture_program("matmul")};
  for (auto& g : oracle::generated_nests(24, 7)) programs.push_back(g.program);
  for (const auto& p : programs) {
    const std::string text = serialize_program(p);
    const LoopProgram back = parse_program(text);
    EXPECT_EQ(back, p);
    EXPECT_EQ(serialize_program(back), text);
  }
}

TEST(Affine, ParseAndPrint) {
  const AffineExpr e = AffineExpr::Parse("4*i + j - 1");
  EXPECT_EQ(e.coeff("i"), 4);
  EXPECT_EQ(e.coeff("j"), 1);
  EXPECT_EQ(e.constant(), -1);
  EXPECT_EQ(AffineExpr::Parse(e.to_string()), e);
  EXPECT_EQ(AffineExpr::Parse("i*2").coeff("i"), 2);
  EXPECT_THROW(AffineExpr::Parse("i*j"), Error);
  EXPECT_THROW(AffineExpr::Parse("i/2"), Error);
}

TEST(Affine, Substitute) {
  const AffineExpr e = AffineExpr::Parse("2*i + 3");
  const AffineExpr s = e.substitute("i", AffineExpr::Parse("i_o + i_i"));
  EXPECT_EQ(s, AffineExpr::Parse("2*i_o + 2*i_i + 3"));
}

TEST(ApplySchedule, TileSplitsExtent) {
  const LoopProgram p = parse_program(test::single_fma_loop(16));
  const LoopProgram t = apply_schedule(p, {Tile{"i", 4}});
  EXPECT_EQ(find_loop(t, "i_o")->extent, 4);
  EXPECT_EQ(find_loop(t, "i_o")->step, 4);
  EXPECT_EQ(find_loop(t, "i_i")->extent, 4);
  EXPECT_EQ(find_loop(t, "i"), nullptr);
}

TEST(ApplySchedule, IdentityTile) {
  const LoopProgram p = parse_program(test::single_fma_loop(16));
  const LoopProgram t = apply_schedule(p, {Tile{"i", 16}});
  EXPECT_EQ(find_loop(t, "i_o")->extent, 1);
  EXPECT_EQ(find_loop(t, "i_i")->extent, 16);
}

TEST(ApplySchedule, ReorderToOriginalOrderIsIdentity) {
  const LoopProgram p = test::fixture_program("matmul");
  EXPECT_EQ(apply_schedule(p, {Reorder{{"i", "j", "k"}}}), p);
}

TEST(ApplySchedule, ReorderPermutesBand) {
  const LoopProgram p = test::fixture_program("matmul");
  EXPECT_EQ(loop_vars(apply_schedule(p, {Reorder{{"k", "i", "j"}}})), (std::vector<std::string>{"k", "i", "j"}));
}

TEST(ApplySchedule, RejectsInvalidTransforms) {
  const LoopProgram p = test::fixture_program("matmul");
  EXPECT_THROW(apply_schedule(p, {Tile{"i", 5}}), Error);
  EXPECT_THROW(apply_schedule(p, {Tile{"q", 4}}), Error);
  EXPECT_THROW(apply_schedule(p, {Reorder{{"i", "i"}}}), Error);
  EXPECT_THROW(apply_schedule(p, {Vectorize{"i", 8}}), Error);  // not innermost
}

TEST(ApplySchedule, PreservesIterationVolume) {
  const LoopProgram p = test::fixture_program("2mm");
  const std::vector<int64_t> before = access_volumes(p);
  const std::vector<Schedule> schedules = {
      {Tile{"k", 16}},
      {Tile{"k", 8}, Reorder{{"k_o", "k_i", "i1", "j1"}}},
      {Tile{"l", 4}, Tile{"j2", 2}},
      {Reorder{{"j1", "i1"}}, Tile{"i1", 2}},
  };
  for (const auto& s : schedules) EXPECT_EQ(access_volumes(apply_schedule(p, s)), before);

  for (auto& g : oracle::generated_nests(12, 3)) {
    const auto vol = access_volumes(g.program);
    const auto loops = preorder_loops(g.program);
    const LoopNode& first = *loops.front().loop;
    if (first.extent % 2 == 0) {
      EXPECT_EQ(access_volumes(apply_schedule(g.program, {Tile{first.var, 2}})), vol);
    }
  }
}

TEST(Schedule, JsonRoundTrip) {
  const Schedule s = {Tile{"i", 8}, Reorder{{"i_o", "j"}}, Unroll{"k"}, Vectorize{"j", 8}, Parallel{"i_o"}};
  EXPECT_EQ(schedule_from_json(schedule_to_json(s)), s);
  EXPECT_EQ(parse_schedule(schedule_to_string(s)), s);
  EXPECT_THROW(parse_schedule(R"([{"kind": "skew", "loop": "i"}])"), Error);
}

TEST(Emitter, SingleFmaLoopX86) {
  const LoopProgram p = parse_program(test::single_fma_loop(8));
  const std::string code = emit_mock_code(p, Target::kX86);
  const Cfg cfg = parse_asm(code, Dialect::kX86Att);
  const auto lbbs = identify_loop_blocks(cfg);
  ASSERT_EQ(lbbs.size(), 1u);
  int fmas = 0;
  for (const auto& insn : cfg.blocks[static_cast<std::size_t>(lbbs[0].block)].insns) {
    fmas += insn.mnemonic.rfind("vfmadd", 0) == 0 ? 1 : 0;
  }
  EXPECT_EQ(fmas, 1);
  EXPECT_EQ(loop_bound(cfg, lbbs[0]), 8);
}

TEST(Emitter, NoLoopsNoBackwardJumps) {
  const LoopProgram p = parse_program(R"({"tensors": [{"name": "A", "dims": [1]}, {"name": "B", "dims": [1]}],
    "body": [{"access": {"tensor": "A", "kind": "load", "idx": [0]}},
             {"access": {"tensor": "B", "kind": "store", "idx": [0]}}]})");
  for (Target t : {Target::kX86, Target::kAArch64, Target::kPtx}) {
    const Cfg cfg = parse_asm(emit_mock_code(p, t), dialect_for(t));
    EXPECT_TRUE(identify_loop_blocks(cfg).empty());
  }
}

TEST(Emitter, Deterministic) {
  const LoopProgram p = test::fixture_program("2mm");
  for (Target t : {Target::kX86, Target::kAArch64, Target::kPtx}) EXPECT_EQ(emit_mock_code(p, t), emit_mock_code(p, t));
}

int innermost_nonempty(const std::vector<Node>& body) {
  int n = 0;
  for (const auto& node : body) {
    if (!node.is_loop()) continue;
    const LoopNode& l = node.loop();
    n += has_loop_below(l) ? innermost_nonempty(l.body) : (l.body.empty() ? 0 : 1);
  }
  return n;
}

TEST(Emitter, LoopBlocksWithMemoryMatchInnermostLoops) {
  std::vector<LoopProgram> programs = {test::fixture_program("2mm"), test::fixture_program("matmul")};
  for (auto& g : oracle::generated_nests(18, 11)) programs.push_back(g.program);
  for (const auto& p : programs) {
    for (Target t : {Target::kX86, Target::kAArch64}) {
      const Cfg cfg = parse_asm(emit_mock_code(p, t), dialect_for(t));
      int with_memory = 0;
      for (const auto& lb : identify_loop_blocks(cfg)) {
        const auto& insns = cfg.blocks[static_cast<std::size_t>(lb.block)].insns;
        with_memory += std::any_of(insns.begin(), insns.end(),
                                   [](const Instruction& i) { return i.cls == InsnClass::kSimdMem; })
                           ? 1
                           : 0;
      }
      EXPECT_EQ(with_memory, innermost_nonempty(p.body)) << serialize_program(p);
    }
  }
}

TEST(EnumerateSpace, TileFactorsCardinality) {
  const LoopProgram p = parse_program(test::single_fma_loop(16));
  const SearchSpace s = parse_space(R"({"knobs": [{"tile": {"loop": "i", "factors": [2, 4, 8]}}]})", p);
  EXPECT_EQ(enumerate_space(p, s).size(), 3u);
}

TEST(EnumerateSpace, CrossProduct) {
  const LoopProgram p = test::fixture_program("matmul");
  const SearchSpace s = parse_space(R"({"knobs": [{"tile": {"loop": "i", "factors": [2, 4]}},
                                                  {"tile": {"loop": "j", "factors": [2, 4]}}]})",
                                    p);
  EXPECT_EQ(s.cardinality(), 4u);
  EXPECT_EQ(enumerate_space(p, s).size(), 4u);
}

TEST(EnumerateSpace, NonDivisorRejected) {
  const LoopProgram p = parse_program(test::single_fma_loop(16));
  EXPECT_THROW(parse_space(R"({"knobs": [{"tile": {"loop": "i", "factors": [5]}}]})", p), Error);
}

TEST(EnumerateSpace, MatmulFixtureHas64Schedules) {
  const LoopProgram p = test::fixture_program("matmul");
  const SearchSpace s = parse_space(json_util::read_file(test::fixture("spaces/matmul64.json")), p);
  const auto all = enumerate_space(p, s);
  EXPECT_EQ(all.size(), 64u);
  std::set<std::string> distinct;
  for (const auto& sch : all) distinct.insert(schedule_to_string(sch));
  EXPECT_EQ(distinct.size(), all.size());
}

}  // namespace
}  // namespace loopcost
