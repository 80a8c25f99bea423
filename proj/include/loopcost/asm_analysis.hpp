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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loopcost/features.hpp"
#include "loopcost/loop_ir.hpp"
#include "loopcost/target.hpp"

namespace loopcost {

enum class Dialect { kX86Att, kAArch64, kPtx };
Dialect dialect_for(Target t);

enum class InsnClass { kSimdArith, kSimdMem, kScalar, kControl, kOther };
std::string_view insn_class_name(InsnClass c);

struct Instruction {
  std::string mnemonic;
  std::vector<std::string> operands;
  std::string predicate;  // PTX guard such as "%p1" (with "!" when negated)
  InsnClass cls = InsnClass::kOther;
  std::size_t line = 0;   // 1-based source line
};

struct BasicBlock {
  std::string label;  // empty for blocks started by a preceding transfer
  std::vector<Instruction> insns;
  std::size_t first_line = 0;
  std::size_t last_line = 0;
};

enum class EdgeKind { kFallthrough, kJump, kCondJump };

struct CfgEdge {
  int from = 0;
  int to = 0;
  EdgeKind kind = EdgeKind::kFallthrough;
};

/// Control-flow graph of one text listing. Blocks are in textual order; a
/// block starts at every label and after every control transfer.
struct Cfg {
  Dialect dialect = Dialect::kX86Att;
  std::vector<BasicBlock> blocks;
  std::vector<CfgEdge> edges;

  int block_of_label(std::string_view label) const;  // -1 if absent
  std::size_t num_instructions() const;
};

/// Parses GNU-assembler style text (or PTX). Throws Error on empty input or a
/// jump to an undefined label.
Cfg parse_asm(std::string_view text, Dialect dialect);

InsnClass classify(std::string_view mnemonic, Dialect dialect);

struct ControlInfo {
  bool transfer = false;     // ends a basic block
  bool conditional = false;
  std::optional<std::string> target;
};
ControlInfo control_info(const Instruction& insn, Dialect dialect);

/// A loop body candidate: a block targeted by a jump located at or below it.
struct LoopBlock {
  int block = 0;  // the targeted block (loop header / body start)
  int latch = 0;  // block holding the last backward jump to it
};

/// Blocks that are targets of backward jumps, in textual order.
std::vector<LoopBlock> identify_loop_blocks(const Cfg& cfg);

/// Immediate loop bound of the compare feeding the latch's backward branch
/// (x86 `cmp $N, reg`, AArch64 `cmp reg, #N`). Register operands are resolved
/// through an earlier `mov $N, reg`.
std::optional<int64_t> loop_bound(const Cfg& cfg, const LoopBlock& lb);

struct LoopBlockMatch {
  int ir_loop = 0;       // pre-order index among all IR loops
  std::string var;       // IR loop variable
  LoopBlock block;
  int64_t trip_count = 0;
};

struct LoopMapResult {
  std::vector<LoopBlockMatch> matches;
  std::vector<std::string> diagnostics;
};

/// Greedy in-order matching of IR loops (pre-order, emitted loops only) to
/// loop blocks: the current IR loop is matched to a candidate when the
/// candidate's bound equals extent or extent*step; only a match advances the
/// IR cursor.
LoopMapResult loop_map(const LoopProgram& ir, const Cfg& cfg);

/// Number of executions of each block: product of the trip counts of every
/// matched loop whose text span (header .. latch) contains the block.
std::vector<int64_t> block_exec_counts(const Cfg& cfg, const std::vector<LoopBlockMatch>& matches);

/// Mnemonic prefixes that make up the significant instruction set.
struct SimdPatterns {
  std::vector<std::string> fma;
  std::vector<std::string> load;   // AArch64/PTX: loads; x86: moves with a memory source
  std::vector<std::string> store;  // AArch64/PTX: stores; x86: moves with a memory destination
  std::vector<std::string> move;   // x86 moves classified by operand direction

  static SimdPatterns defaults(Target t);
};

/// Trip-weighted counts of significant instructions: n_fma, n_vload, n_vstore.
FeatureContribution count_simd(const LoopProgram& ir, const Cfg& cfg, const std::vector<LoopBlockMatch>& matches,
                               Target target, const SimdPatterns& patterns);
FeatureContribution count_simd(const LoopProgram& ir, const Cfg& cfg, const std::vector<LoopBlockMatch>& matches,
                               Target target);

/// Splits "a, (b,c), [d, e]" at top-level commas.
std::vector<std::string> split_operands(std::string_view text);
std::optional<int64_t> parse_immediate(std::string_view operand);  // "$8", "#8", "8", "0x10"

}  // namespace loopcost
