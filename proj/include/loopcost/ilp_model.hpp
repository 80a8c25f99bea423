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
#include <string>
#include <vector>

#include "loopcost/asm_analysis.hpp"
#include "loopcost/features.hpp"

namespace loopcost {

/// Registers and memory resources an instruction reads and writes. Register
/// names are normalized so aliases share one name (`s3`, `q3`, `v3` -> `v3`;
/// `xmm3`, `ymm3` -> `vec3`; `w9`, `x9` -> `x9`); memory is one resource per
/// base register (`mem:rdi`). Condition flags are the resource `flags`.
struct InsnEffects {
  std::vector<std::string> reads;
  std::vector<std::string> writes;
  std::string latency_class;  // key into SchedSpec::latency
  std::string mnemonic;
};

InsnEffects insn_effects(const Instruction& insn, Dialect dialect);
std::string normalize_register(std::string_view reg, Dialect dialect);
/// "fma", "simd_arith", "load", "store", "scalar", "control" or "other".
std::string latency_class(const Instruction& insn, Dialect dialect);

struct DepEdge {
  int from = 0;
  int to = 0;
  friend bool operator==(const DepEdge&, const DepEdge&) = default;
};

struct DepGraph {
  std::vector<InsnEffects> nodes;
  std::vector<DepEdge> true_edges;   // read-after-write
  std::vector<DepEdge> false_edges;  // write-after-read and write-after-write

  std::size_t size() const { return nodes.size(); }
};

DepGraph build_deps(const std::vector<InsnEffects>& insns);
DepGraph build_deps(const BasicBlock& block, Dialect dialect);

struct SchedSpec {
  int issue_width = 1;
  std::map<std::string, int64_t, std::less<>> latency;      // per class or exact mnemonic
  int64_t default_latency = 1;
  std::map<std::string, int, std::less<>> units;            // optional per-class issue limit

  /// Exact mnemonic first, then the latency class, then the default.
  int64_t latency_of(const InsnEffects& n) const;
  int units_of(const InsnEffects& n) const;  // 0 = unlimited
};

struct BlockSchedule {
  std::vector<int64_t> issue;  // issue cycle per instruction
  int64_t cycles = 0;          // max(issue + latency); 0 for an empty block
};

/// Greedy cycle-by-cycle list scheduling in program order. Throws
/// InternalError on a backward edge.
BlockSchedule schedule_block(const DepGraph& g, const SchedSpec& spec);

/// Longest RAW chain weighted by producer latency, plus the sink latency.
int64_t critical_path(const DepGraph& g, const SchedSpec& spec);

/// ilp_cycles = sum over blocks of scheduled cycles times execution count.
FeatureContribution ilp_feature(const Cfg& cfg, const std::vector<LoopBlockMatch>& matches, const SchedSpec& spec);

}  // namespace loopcost
