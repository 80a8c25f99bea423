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

#include "loopcost/ptx_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "loopcost/error.hpp"
#include "loopcost/json_util.hpp"

namespace loopcost {

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int64_t ceil_div(int64_t a, int64_t b) { return -floor_div(-a, b); }

// Comparison of "setp.lt.s32" -> "lt".
std::string setp_cmp(std::string_view m) {
  std::size_t a = m.find('.');
  if (a == std::string_view::npos) return "";
  std::size_t b = m.find('.', a + 1);
  return std::string(m.substr(a + 1, b == std::string_view::npos ? std::string_view::npos : b - a - 1));
}

std::string swap_cmp(const std::string& c) {
  if (c == "lt") return "gt";
  if (c == "gt") return "lt";
  if (c == "le") return "ge";
  if (c == "ge") return "le";
  return c;
}

std::string negate_cmp(const std::string& c) {
  if (c == "lt") return "ge";
  if (c == "ge") return "lt";
  if (c == "le") return "gt";
  if (c == "gt") return "le";
  if (c == "ne") return "eq";
  if (c == "eq") return "ne";
  return c;
}

bool is_register(std::string_view s) { return !s.empty() && s.front() == '%'; }

}  // namespace

void GpuSpec::validate() const {
  if (num_sms <= 0 || max_threads_per_sm <= 0 || registers_per_sm <= 0 || shared_mem_per_sm_bytes <= 0) {
    throw Error("gpu spec values must be positive");
  }
  if (warp_size != 32 || banks != 32) throw Error("warp size and bank count are fixed at 32");
  for (const auto& [k, v] : instr_cost) {
    if (!std::isfinite(v) || v < 0) throw Error("instruction cost for '" + k + "' must be finite and non-negative");
  }
}

KernelLaunch launch_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("launch record must be a JSON object");
  KernelLaunch l;
  l.grid_blocks = json_util::get_static_int(j, "grid_blocks");
  l.threads_per_block = json_util::get_static_int(j, "threads_per_block");
  l.registers_per_thread = json_util::get_static_int(j, "registers_per_thread");
  l.shared_mem_per_block_bytes = j.contains("shared_mem_per_block") ? json_util::get_static_int(j, "shared_mem_per_block") : 0;
  if (l.threads_per_block <= 0) throw Error("threads_per_block must be positive");
  if (l.grid_blocks <= 0 || l.registers_per_thread <= 0) {
    throw Error("grid_blocks and registers_per_thread must be positive");
  }
  if (l.shared_mem_per_block_bytes < 0) throw Error("shared_mem_per_block must be non-negative");
  return l;
}

nlohmann::json launch_to_json(const KernelLaunch& l) {
  return nlohmann::json{{"grid_blocks", l.grid_blocks},
                        {"threads_per_block", l.threads_per_block},
                        {"registers_per_thread", l.registers_per_thread},
                        {"shared_mem_per_block", l.shared_mem_per_block_bytes}};
}

KernelLaunch parse_launch(std::string_view text) { return launch_from_json(json_util::parse_with_position(text)); }

void apply_ptxas_info(std::string_view text, KernelLaunch& launch) {
  static const std::regex used(R"(Used\s+(\d+)\s+registers)");
  static const std::regex smem(R"((\d+)\s+bytes\s+smem)");
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, used)) throw Error("no 'Used N registers' line in ptxas output");
  launch.registers_per_thread = std::stoll(m[1]);
  if (std::regex_search(s, m, smem)) launch.shared_mem_per_block_bytes = std::stoll(m[1]);
}

std::vector<LoopBlockMatch> PtxLoopMap::as_matches() const {
  std::vector<LoopBlockMatch> out;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (!loops[i].trip_count) continue;
    out.push_back({static_cast<int>(i), loops[i].induction, loops[i].block, *loops[i].trip_count});
  }
  return out;
}

RegMaps register_maps(const Cfg& cfg, const LoopBlock& lb) {
  RegMaps maps;
  // Constant moves before the loop header, closest one wins.
  for (int b = 0; b < lb.block; ++b) {
    for (const auto& in : cfg.blocks[static_cast<std::size_t>(b)].insns) {
      if (!starts_with(in.mnemonic, "mov") || in.operands.size() != 2) continue;
      if (auto v = parse_immediate(in.operands[1])) {
        maps.init[in.operands[0]] = *v;
      } else {
        maps.init.erase(in.operands[0]);
      }
    }
  }
  for (int b = lb.block; b <= lb.latch; ++b) {
    for (const auto& in : cfg.blocks[static_cast<std::size_t>(b)].insns) {
      if (in.operands.size() != 3 || in.operands[0] != in.operands[1]) continue;
      const std::string& reg = in.operands[0];
      auto imm = parse_immediate(in.operands[2]);
      if (starts_with(in.mnemonic, "add.") && imm) {
        maps.update[reg] += *imm;
      } else if (starts_with(in.mnemonic, "sub.") && imm) {
        maps.update[reg] -= *imm;
      } else if (starts_with(in.mnemonic, "mul") || starts_with(in.mnemonic, "shl")) {
        maps.nonlinear[reg] = in.mnemonic;
      }
    }
  }
  return maps;
}

std::optional<int64_t> trip_count(int64_t init, int64_t delta, int64_t end, std::string_view cmp) {
  if (delta == 0) return std::nullopt;
  int64_t n = 0;
  if (cmp == "lt") {
    if (delta < 0) return std::nullopt;
    n = ceil_div(end - init, delta);
  } else if (cmp == "le") {
    if (delta < 0) return std::nullopt;
    n = floor_div(end - init, delta) + 1;
  } else if (cmp == "gt") {
    if (delta > 0) return std::nullopt;
    n = ceil_div(init - end, -delta);
  } else if (cmp == "ge") {
    if (delta > 0) return std::nullopt;
    n = floor_div(init - end, -delta) + 1;
  } else if (cmp == "ne") {
    if ((end - init) % delta != 0 || (end - init) / delta < 0) return std::nullopt;
    n = (end - init) / delta;
  } else {
    return std::nullopt;
  }
  // The body runs before the first test.
  return std::max<int64_t>(1, n);
}

PtxLoopMap loop_map_ptx(std::string_view ptx) {
  PtxLoopMap out;
  out.cfg = parse_asm(ptx, Dialect::kPtx);
  const Cfg& cfg = out.cfg;
  for (const LoopBlock& lb : identify_loop_blocks(cfg)) {
    PtxLoop loop;
    loop.block = lb;
    const BasicBlock& latch = cfg.blocks[static_cast<std::size_t>(lb.latch)];
    const std::string where = "loop at line " + std::to_string(cfg.blocks[static_cast<std::size_t>(lb.block)].first_line);
    const Instruction& br = latch.insns.back();
    std::string pred = br.predicate;
    bool negated = false;
    if (!pred.empty() && pred.front() == '!') {
      negated = true;
      pred.erase(0, 1);
    }
    const Instruction* setp = nullptr;
    for (std::size_t i = latch.insns.size() - 1; i-- > 0;) {
      const Instruction& in = latch.insns[i];
      if (starts_with(in.mnemonic, "setp") && !in.operands.empty() && in.operands[0] == pred) {
        setp = &in;
        break;
      }
    }
    if (pred.empty() || setp == nullptr || setp->operands.size() < 3) {
      out.diagnostics.push_back(where + ": no setp condition feeding the backward branch; trip count unknown");
      out.loops.push_back(loop);
      continue;
    }
    std::string cmp = setp_cmp(setp->mnemonic);
    std::string lhs = setp->operands[1];
    std::string rhs = setp->operands[2];
    const RegMaps maps = register_maps(cfg, lb);
    auto is_induction = [&](const std::string& r) { return maps.update.count(r) > 0 || maps.nonlinear.count(r) > 0; };
    if (!is_induction(lhs) && is_induction(rhs)) {
      std::swap(lhs, rhs);
      cmp = swap_cmp(cmp);
    }
    if (negated) cmp = negate_cmp(cmp);
    loop.induction = lhs;
    if (maps.nonlinear.count(lhs) > 0) {
      out.diagnostics.push_back(where + ": induction register " + lhs + " updated by " + maps.nonlinear.at(lhs) +
                                "; trip count unknown");
      out.loops.push_back(loop);
      continue;
    }
    std::optional<int64_t> end = parse_immediate(rhs);
    if (!end && is_register(rhs)) {
      if (auto it = maps.init.find(rhs); it != maps.init.end() && maps.update.count(rhs) == 0) end = it->second;
    }
    auto init = maps.init.find(lhs);
    auto upd = maps.update.find(lhs);
    if (!end || init == maps.init.end() || upd == maps.update.end()) {
      out.diagnostics.push_back(where + ": induction register " + lhs + " has no constant init/update/bound");
      out.loops.push_back(loop);
      continue;
    }
    loop.trip_count = trip_count(init->second, upd->second, *end, cmp);
    if (!loop.trip_count) out.diagnostics.push_back(where + ": loop condition does not terminate cleanly");
    out.loops.push_back(loop);
  }
  return out;
}

std::optional<double> instruction_cost(std::string_view mnemonic, const GpuSpec& spec) {
  std::optional<double> best;
  std::size_t best_len = 0;
  for (const auto& [prefix, cost] : spec.instr_cost) {
    if (prefix.size() >= best_len && starts_with(mnemonic, prefix)) {
      best = cost;
      best_len = prefix.size();
    }
  }
  return best;
}

double weighted_cycles(const std::map<std::string, double>& counts, const GpuSpec& spec,
                       std::vector<std::string>* unknown) {
  double total = 0;
  for (const auto& [op, n] : counts) {
    if (auto c = instruction_cost(op, spec)) {
      total += n * *c;
    } else if (unknown != nullptr) {
      unknown->push_back(op);
    }
  }
  return total;
}

PtxWorkload analyze_ptx(std::string_view ptx, const GpuSpec& spec) {
  PtxWorkload w;
  const PtxLoopMap map = loop_map_ptx(ptx);
  w.diagnostics = map.diagnostics;
  const std::vector<int64_t> exec = block_exec_counts(map.cfg, map.as_matches());
  for (std::size_t b = 0; b < map.cfg.blocks.size(); ++b) {
    const double n = static_cast<double>(exec[b]);
    for (const auto& in : map.cfg.blocks[b].insns) {
      const std::string& m = in.mnemonic;
      w.counts[m] += n;
      if (starts_with(m, "fma")) w.n_fma += n;
      if (starts_with(m, "ld.") && !starts_with(m, "ld.param")) w.n_ld += n;
      if (starts_with(m, "st.")) w.n_st += n;
      if (starts_with(m, "ld.shared") || starts_with(m, "st.shared")) w.n_smem_ops += n;
    }
  }
  std::vector<std::string> unknown;
  w.cycles = weighted_cycles(w.counts, spec, &unknown);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    w.diagnostics.push_back("no cycle cost for: " + list + " (counted as 0)");
  }
  return w;
}

double thread_cycles(std::string_view ptx, const GpuSpec& spec) { return analyze_ptx(ptx, spec).cycles; }

FeatureContribution sm_occupancy_feature(const KernelLaunch& launch, const GpuSpec& spec) {
  FeatureContribution fc;
  const int64_t idle = std::max<int64_t>(0, spec.num_sms - launch.grid_blocks);
  fc.set("sm_underuse", static_cast<double>(idle) / static_cast<double>(spec.num_sms));
  return fc;
}

int64_t blocks_per_sm(const KernelLaunch& launch, const GpuSpec& spec) {
  if (launch.threads_per_block <= 0) throw Error("threads_per_block must be positive");
  int64_t blocks = spec.max_threads_per_sm / launch.threads_per_block;
  const int64_t regs = launch.registers_per_thread * launch.threads_per_block;
  if (regs > 0) blocks = std::min(blocks, spec.registers_per_sm / regs);
  if (launch.shared_mem_per_block_bytes > 0) {
    blocks = std::min(blocks, spec.shared_mem_per_sm_bytes / launch.shared_mem_per_block_bytes);
  }
  return std::max<int64_t>(0, blocks);
}

FeatureContribution warp_hiding_feature(const KernelLaunch& launch, const GpuSpec& spec) {
  FeatureContribution fc;
  const double warps =
      static_cast<double>(blocks_per_sm(launch, spec) * launch.threads_per_block) / static_cast<double>(spec.warp_size);
  fc.set("warp_slack", 1.0 / std::max(1.0, warps));
  return fc;
}

int64_t bank_conflict_degree(const std::vector<int64_t>& word_addresses, int64_t banks) {
  std::map<int64_t, std::set<int64_t>> per_bank;
  for (int64_t a : word_addresses) {
    int64_t bank = a % banks;
    if (bank < 0) bank += banks;
    per_bank[bank].insert(a);
  }
  int64_t degree = 1;
  for (const auto& [bank, addrs] : per_bank) degree = std::max<int64_t>(degree, static_cast<int64_t>(addrs.size()));
  return degree;
}

std::vector<int64_t> first_warp_addresses(const LoopProgram& p, const AccessNode& a,
                                          const std::vector<const LoopNode*>& enclosing, const KernelLaunch& launch,
                                          int64_t warp_size) {
  std::vector<const LoopNode*> par;
  for (const LoopNode* l : enclosing) {
    if (l->attrs.parallel) par.push_back(l);
  }
  int64_t span = 1;
  for (const LoopNode* l : par) span *= l->extent;
  const int64_t threads = std::min({warp_size, launch.threads_per_block, span});
  const TensorDecl& t = p.tensor(a.tensor);
  std::vector<int64_t> out;
  for (int64_t tid = 0; tid < threads; ++tid) {
    std::map<std::string, int64_t, std::less<>> value;
    int64_t rest = tid;
    for (auto it = par.rbegin(); it != par.rend(); ++it) {
      value[(*it)->var] = (rest % (*it)->extent) * (*it)->step;
      rest /= (*it)->extent;
    }
    int64_t linear = 0;
    for (std::size_t d = 0; d < a.index.size(); ++d) {
      const int64_t idx = a.index[d].eval([&](std::string_view v) {
        auto f = value.find(v);
        return f == value.end() ? int64_t{0} : f->second;
      });
      linear = linear * t.dims[d] + idx;
    }
    out.push_back(linear * t.elem_bytes / 4);
  }
  return out;
}

BankConflictReport bank_conflict_factor(const LoopProgram& p, const KernelLaunch& launch, const GpuSpec& spec) {
  BankConflictReport r;
  for_each_access(p, [&](const AccessNode& a, const std::vector<const LoopNode*>& enclosing) {
    if (p.tensor(a.tensor).scope != MemoryScope::kShared) return;
    r.degrees.push_back(
        bank_conflict_degree(first_warp_addresses(p, a, enclosing, launch, spec.warp_size), spec.banks));
  });
  if (!r.degrees.empty()) {
    double sum = 0;
    for (int64_t d : r.degrees) sum += static_cast<double>(d);
    r.factor = sum / static_cast<double>(r.degrees.size());
  }
  return r;
}

FeatureContribution gpu_features(const LoopProgram& p, std::string_view ptx, const KernelLaunch& launch,
                                 const GpuSpec& spec) {
  FeatureContribution fc;
  const PtxWorkload w = analyze_ptx(ptx, spec);
  fc.diagnostics = w.diagnostics;
  fc.set("workload_per_thread", w.cycles);
  fc.set("sm_underuse", sm_occupancy_feature(launch, spec).get("sm_underuse"));
  fc.set("warp_slack", warp_hiding_feature(launch, spec).get("warp_slack"));
  fc.set("n_smem_ops_adjusted", w.n_smem_ops * bank_conflict_factor(p, launch, spec).factor);
  fc.set("n_fma", w.n_fma);
  fc.set("n_ld", w.n_ld);
  fc.set("n_st", w.n_st);
  return fc;
}

}  // namespace loopcost
