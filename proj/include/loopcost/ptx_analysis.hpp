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

#include "json.hpp"
#include "loopcost/asm_analysis.hpp"
#include "loopcost/features.hpp"
#include "loopcost/loop_ir.hpp"

namespace loopcost {

struct GpuSpec {
  int64_t num_sms = 80;
  int64_t max_threads_per_sm = 2048;
  int64_t registers_per_sm = 65536;
  int64_t shared_mem_per_sm_bytes = 98304;
  int64_t warp_size = 32;
  int64_t banks = 32;
  /// Cycles per opcode prefix ("fma", "ld.shared", ...); the longest matching prefix wins.
  std::map<std::string, double, std::less<>> instr_cost;

  void validate() const;  // throws Error
};

struct KernelLaunch {
  int64_t grid_blocks = 1;
  int64_t threads_per_block = 1;
  int64_t registers_per_thread = 1;
  int64_t shared_mem_per_block_bytes = 0;

  friend bool operator==(const KernelLaunch&, const KernelLaunch&) = default;
};

/// {"grid_blocks", "threads_per_block", "registers_per_thread", "shared_mem_per_block"}.
KernelLaunch launch_from_json(const nlohmann::json& j);
nlohmann::json launch_to_json(const KernelLaunch& l);
KernelLaunch parse_launch(std::string_view text);
/// Overrides register and shared-memory usage from ptxas -v output
/// ("Used 32 registers, 4096 bytes smem, ..."). Throws Error if no such line exists.
void apply_ptxas_info(std::string_view text, KernelLaunch& launch);

/// Register facts gathered for one loop.
struct RegMaps {
  std::map<std::string, int64_t> init;          // last constant move before the loop
  std::map<std::string, int64_t> update;        // additive self-update per iteration
  std::map<std::string, std::string> nonlinear;  // register -> opcode of a non-additive self-update
};

struct PtxLoop {
  LoopBlock block;
  std::string induction;               // register compared in the latch
  std::optional<int64_t> trip_count;   // empty when not derivable
};

struct PtxLoopMap {
  Cfg cfg;
  std::vector<PtxLoop> loops;  // textual order of loop headers
  std::vector<std::string> diagnostics;

  /// Known-trip loops as matches for block_exec_counts; unknown loops count once.
  std::vector<LoopBlockMatch> as_matches() const;
};

RegMaps register_maps(const Cfg& cfg, const LoopBlock& lb);

/// Trip count of a post-tested loop `do { r += delta } while (r cmp end)`.
/// `cmp` is one of lt, le, gt, ge, ne. Returns nullopt for degenerate input.
std::optional<int64_t> trip_count(int64_t init, int64_t delta, int64_t end, std::string_view cmp);

PtxLoopMap loop_map_ptx(std::string_view ptx);

/// Opcode of a PTX mnemonic up to the type suffix (e.g. "ld.shared.f32" stays
/// whole; cost lookup uses the longest prefix of the full mnemonic).
std::optional<double> instruction_cost(std::string_view mnemonic, const GpuSpec& spec);

/// sum(count * cost) over opcodes; opcodes absent from the cost table cost 0
/// and are named in `unknown` when given.
double weighted_cycles(const std::map<std::string, double>& counts, const GpuSpec& spec,
                       std::vector<std::string>* unknown = nullptr);

struct PtxWorkload {
  std::map<std::string, double> counts;  // trip-weighted per mnemonic
  double cycles = 0;                     // workload_per_thread
  double n_fma = 0;
  double n_ld = 0;  // excludes parameter loads
  double n_st = 0;
  double n_smem_ops = 0;
  std::vector<std::string> diagnostics;
};

PtxWorkload analyze_ptx(std::string_view ptx, const GpuSpec& spec);
double thread_cycles(std::string_view ptx, const GpuSpec& spec);

/// sm_underuse = max(0, num_sms - grid_blocks) / num_sms.
FeatureContribution sm_occupancy_feature(const KernelLaunch& launch, const GpuSpec& spec);

int64_t blocks_per_sm(const KernelLaunch& launch, const GpuSpec& spec);
/// warp_slack = 1 / max(1, blocks_per_sm * threads_per_block / warp_size).
FeatureContribution warp_hiding_feature(const KernelLaunch& launch, const GpuSpec& spec);

/// Maximum number of distinct word addresses falling in one bank (1 when empty).
int64_t bank_conflict_degree(const std::vector<int64_t>& word_addresses, int64_t banks = 32);

/// Word addresses of a shared access for the threads of the first warp. Thread
/// ids are spread over the enclosing parallel loops, innermost fastest; other
/// loop variables are held at zero.
std::vector<int64_t> first_warp_addresses(const LoopProgram& p, const AccessNode& a,
                                          const std::vector<const LoopNode*>& enclosing, const KernelLaunch& launch,
                                          int64_t warp_size = 32);

struct BankConflictReport {
  std::vector<int64_t> degrees;  // per shared access, in pre-order
  double factor = 1.0;           // mean degree, 1 without shared accesses
};

BankConflictReport bank_conflict_factor(const LoopProgram& p, const KernelLaunch& launch, const GpuSpec& spec);

/// All seven GPU features for PTX produced from `p`.
FeatureContribution gpu_features(const LoopProgram& p, std::string_view ptx, const KernelLaunch& launch,
                                 const GpuSpec& spec);

}  // namespace loopcost
