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

#include "loopcost/ilp_model.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include "loopcost/error.hpp"

namespace loopcost {

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_memory(std::string_view op) {
  return op.find('(') != std::string_view::npos || op.find('[') != std::string_view::npos;
}

// Register-looking tokens of an operand, in order.
std::vector<std::string> register_tokens(std::string_view op, Dialect d) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  if (d == Dialect::kX86Att || d == Dialect::kPtx) {
    bool in_reg = false;
    for (char c : op) {
      if (c == '%') {
        flush();
        in_reg = true;
        continue;
      }
      if (in_reg && (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || (d == Dialect::kPtx && c == '.'))) {
        cur.push_back(c);
      } else {
        in_reg = false;
        flush();
      }
    }
    flush();
    if (d == Dialect::kPtx && out.empty()) {
      // Parameter-space symbols such as "[kernel_param_0]".
      std::string_view s = op;
      while (!s.empty() && (s.front() == '[' || s.front() == ' ')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ']' || s.back() == ' ')) s.remove_suffix(1);
      if (!s.empty() && (std::isalpha(static_cast<unsigned char>(s.front())) || s.front() == '_')) {
        out.emplace_back(s.substr(0, s.find_first_of("+ ")));
      }
    }
    return out;
  }
  // AArch64: split on separators and keep register-shaped words.
  for (char c : op) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  std::vector<std::string> regs;
  for (const auto& t : out) {
    std::string_view w = t;
    w = w.substr(0, w.find('.'));
    if (w == "sp" || w == "xzr" || w == "wzr") {
      regs.emplace_back(w);
    } else if (w.size() >= 2 && std::string_view("xwsdqvbh").find(w[0]) != std::string_view::npos &&
               all_digits(w.substr(1))) {
      regs.emplace_back(w);
    }
  }
  // "lsl #2": shift amounts are not registers; "lsl" never matches above.
  return regs;
}

}  // namespace

std::string normalize_register(std::string_view reg, Dialect d) {
  if (!reg.empty() && reg.front() == '%' && d == Dialect::kX86Att) reg.remove_prefix(1);
  std::string r(reg);
  switch (d) {
    case Dialect::kX86Att: {
      for (const char* p : {"xmm", "ymm", "zmm"}) {
        if (starts_with(r, p)) return "vec" + r.substr(3);
      }
      // r8d/r8w/r8b -> r8; eax -> rax.
      if (r.size() >= 3 && r[0] == 'r' && std::isdigit(static_cast<unsigned char>(r[1]))) {
        std::size_t k = 1;
        while (k < r.size() && std::isdigit(static_cast<unsigned char>(r[k]))) ++k;
        return r.substr(0, k);
      }
      if (r.size() == 3 && r[0] == 'e') return "r" + r.substr(1);
      return r;
    }
    case Dialect::kAArch64: {
      std::string_view w = reg.substr(0, reg.find('.'));
      if (w.size() >= 2 && all_digits(w.substr(1))) {
        if (std::string_view("sdqvbh").find(w[0]) != std::string_view::npos) return "v" + std::string(w.substr(1));
        if (w[0] == 'w' || w[0] == 'x') return "x" + std::string(w.substr(1));
      }
      if (w == "wzr") return "xzr";
      return std::string(w);
    }
    case Dialect::kPtx:
      return r;
  }
  return r;
}

std::string latency_class(const Instruction& insn, Dialect d) {
  const std::string& m = insn.mnemonic;
  switch (d) {
    case Dialect::kX86Att:
      if (starts_with(m, "vfmadd") || starts_with(m, "vfmsub") || starts_with(m, "vfnmadd")) return "fma";
      if (starts_with(m, "vmov") || starts_with(m, "vbroadcast")) {
        if (!insn.operands.empty() && is_memory(insn.operands.front())) return "load";
        if (!insn.operands.empty() && is_memory(insn.operands.back())) return "store";
        return "simd_arith";
      }
      break;
    case Dialect::kAArch64:
      if (starts_with(m, "fmla") || starts_with(m, "fmls") || starts_with(m, "fmadd")) return "fma";
      if (starts_with(m, "ld")) return "load";
      if (starts_with(m, "st")) return "store";
      break;
    case Dialect::kPtx:
      if (starts_with(m, "fma") || starts_with(m, "mad.rn")) return "fma";
      if (starts_with(m, "ld.")) return "load";
      if (starts_with(m, "st.")) return "store";
      break;
  }
  switch (insn.cls) {
    case InsnClass::kSimdArith:
      return "simd_arith";
    case InsnClass::kSimdMem:
      return "load";
    case InsnClass::kScalar:
      return "scalar";
    case InsnClass::kControl:
      return "control";
    case InsnClass::kOther:
      return "other";
  }
  return "other";
}

InsnEffects insn_effects(const Instruction& insn, Dialect d) {
  InsnEffects e;
  e.mnemonic = insn.mnemonic;
  e.latency_class = latency_class(insn, d);
  const std::string& m = insn.mnemonic;
  const auto& ops = insn.operands;

  auto add = [](std::vector<std::string>& v, std::string r) {
    if (std::find(v.begin(), v.end(), r) == v.end()) v.push_back(std::move(r));
  };
  auto read_operand = [&](const std::string& op) {
    for (const auto& r : register_tokens(op, d)) add(e.reads, normalize_register(r, d));
    if (is_memory(op)) {
      auto regs = register_tokens(op, d);
      if (!regs.empty()) add(e.reads, "mem:" + normalize_register(regs.front(), d));
    }
  };
  auto write_operand = [&](const std::string& op) {
    if (is_memory(op)) {
      auto regs = register_tokens(op, d);
      for (const auto& r : regs) add(e.reads, normalize_register(r, d));
      if (!regs.empty()) add(e.writes, "mem:" + normalize_register(regs.front(), d));
      return;
    }
    for (const auto& r : register_tokens(op, d)) add(e.writes, normalize_register(r, d));
  };
  auto dst_also_read = [&](const std::string& op) {
    for (const auto& r : register_tokens(op, d)) add(e.reads, normalize_register(r, d));
  };

  if (!insn.predicate.empty()) {
    std::string p = insn.predicate;
    if (!p.empty() && p.front() == '!') p.erase(0, 1);
    add(e.reads, normalize_register(p, d));
  }

  switch (d) {
    case Dialect::kX86Att: {
      if (starts_with(m, "j")) {
        if (m != "jmp" && m != "jmpq") add(e.reads, "flags");
        return e;
      }
      if (m == "ret" || m == "retq" || starts_with(m, "call") || m == "nop") return e;
      if (starts_with(m, "cmp") || starts_with(m, "test") || starts_with(m, "vucomis") || starts_with(m, "vcomis")) {
        for (const auto& op : ops) read_operand(op);
        add(e.writes, "flags");
        return e;
      }
      if (ops.empty()) return e;
      for (std::size_t i = 0; i + 1 < ops.size(); ++i) read_operand(ops[i]);
      const bool moves = starts_with(m, "mov") || starts_with(m, "vmov") || starts_with(m, "lea") ||
                         starts_with(m, "vbroadcast") || starts_with(m, "cvt") || starts_with(m, "vcvt");
      const bool three_op_avx = m.size() > 1 && m[0] == 'v' && ops.size() >= 3 && !starts_with(m, "vfm") &&
                                !starts_with(m, "vfnm");
      if (!moves && !three_op_avx) dst_also_read(ops.back());
      write_operand(ops.back());
      if (!m.empty() && m[0] != 'v' && !moves) add(e.writes, "flags");
      return e;
    }
    case Dialect::kAArch64: {
      if (m == "b" || m == "ret" || m == "br" || m == "bl" || m == "blr" || m == "nop") return e;
      if (starts_with(m, "b.")) {
        add(e.reads, "flags");
        return e;
      }
      if (m == "cbz" || m == "cbnz" || m == "tbz" || m == "tbnz") {
        if (!ops.empty()) read_operand(ops.front());
        return e;
      }
      if (m == "cmp" || m == "cmn" || m == "tst" || m == "fcmp") {
        for (const auto& op : ops) read_operand(op);
        add(e.writes, "flags");
        return e;
      }
      if (starts_with(m, "st")) {
        for (const auto& op : ops) {
          if (is_memory(op)) {
            write_operand(op);
          } else {
            read_operand(op);
          }
        }
        return e;
      }
      if (starts_with(m, "ld")) {
        const std::size_t ndst = (m == "ldp" || m == "ldnp") ? 2 : 1;
        for (std::size_t i = 0; i < ops.size(); ++i) {
          if (is_memory(ops[i])) {
            read_operand(ops[i]);
          } else if (i < ndst || starts_with(ops[i], "{")) {
            write_operand(ops[i]);
          }
        }
        return e;
      }
      if (ops.empty()) return e;
      for (std::size_t i = 1; i < ops.size(); ++i) read_operand(ops[i]);
      if (starts_with(m, "fmla") || starts_with(m, "fmls") || m == "movk") dst_also_read(ops.front());
      write_operand(ops.front());
      if (m == "subs" || m == "adds" || m == "ands") add(e.writes, "flags");
      return e;
    }
    case Dialect::kPtx: {
      if (starts_with(m, "bra") || m == "ret" || m == "exit" || starts_with(m, "bar")) return e;
      if (starts_with(m, "st.")) {
        for (const auto& op : ops) {
          if (is_memory(op)) {
            write_operand(op);
          } else {
            read_operand(op);
          }
        }
        return e;
      }
      if (ops.empty()) return e;
      for (std::size_t i = 1; i < ops.size(); ++i) read_operand(ops[i]);
      // setp may define "%p|%q".
      write_operand(ops.front());
      return e;
    }
  }
  return e;
}

DepGraph build_deps(const std::vector<InsnEffects>& insns) {
  DepGraph g;
  g.nodes = insns;
  std::map<std::string, int> last_writer;
  std::map<std::string, std::vector<int>> readers;  // since the last write
  std::set<std::pair<int, int>> raw;
  std::set<std::pair<int, int>> fal;
  for (int i = 0; i < static_cast<int>(insns.size()); ++i) {
    const InsnEffects& n = insns[static_cast<std::size_t>(i)];
    for (const auto& r : n.reads) {
      auto it = last_writer.find(r);
      if (it != last_writer.end()) raw.emplace(it->second, i);
    }
    for (const auto& w : n.writes) {
      auto it = last_writer.find(w);
      if (it != last_writer.end() && it->second != i) fal.emplace(it->second, i);
      for (int rd : readers[w]) {
        if (rd != i) fal.emplace(rd, i);
      }
    }
    for (const auto& r : n.reads) readers[r].push_back(i);
    for (const auto& w : n.writes) {
      last_writer[w] = i;
      readers[w].clear();
    }
  }
  for (const auto& [a, b] : raw) g.true_edges.push_back({a, b});
  for (const auto& [a, b] : fal) g.false_edges.push_back({a, b});
  return g;
}

DepGraph build_deps(const BasicBlock& block, Dialect dialect) {
  std::vector<InsnEffects> v;
  v.reserve(block.insns.size());
  for (const auto& in : block.insns) v.push_back(insn_effects(in, dialect));
  return build_deps(v);
}

int64_t SchedSpec::latency_of(const InsnEffects& n) const {
  if (auto it = latency.find(n.mnemonic); it != latency.end()) return it->second;
  if (auto it = latency.find(n.latency_class); it != latency.end()) return it->second;
  return default_latency;
}

int SchedSpec::units_of(const InsnEffects& n) const {
  if (auto it = units.find(n.latency_class); it != units.end()) return it->second;
  return 0;
}

BlockSchedule schedule_block(const DepGraph& g, const SchedSpec& spec) {
  if (spec.issue_width < 1) throw Error("issue width must be at least 1");
  const std::size_t n = g.size();
  BlockSchedule s;
  s.issue.assign(n, -1);
  if (n == 0) return s;

  struct Pred {
    int from;
    bool raw;
  };
  std::vector<std::vector<Pred>> preds(n);
  for (const auto& e : g.true_edges) {
    if (e.from >= e.to) throw InternalError("dependency graph edge does not point forward");
    preds[static_cast<std::size_t>(e.to)].push_back({e.from, true});
  }
  for (const auto& e : g.false_edges) {
    if (e.from >= e.to) throw InternalError("dependency graph edge does not point forward");
    preds[static_cast<std::size_t>(e.to)].push_back({e.from, false});
  }
  std::vector<int64_t> lat(n);
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = spec.latency_of(g.nodes[i]);
    if (lat[i] < 1) throw Error("instruction latency must be at least 1");
  }

  std::size_t done = 0;
  int64_t cycle = 0;
  while (done < n) {
    int issued = 0;
    std::map<std::string, int> used;
    int64_t next_ready = std::numeric_limits<int64_t>::max();
    for (std::size_t i = 0; i < n && issued < spec.issue_width; ++i) {
      if (s.issue[i] >= 0) continue;
      bool ready = true;
      int64_t earliest = 0;
      for (const auto& p : preds[i]) {
        const int64_t t = s.issue[static_cast<std::size_t>(p.from)];
        if (t < 0) {
          ready = false;
          break;
        }
        earliest = std::max(earliest, t + (p.raw ? lat[static_cast<std::size_t>(p.from)] : 1));
      }
      if (!ready) continue;
      if (earliest > cycle) {
        next_ready = std::min(next_ready, earliest);
        continue;
      }
      const int limit = spec.units_of(g.nodes[i]);
      if (limit > 0 && used[g.nodes[i].latency_class] >= limit) {
        next_ready = std::min(next_ready, cycle + 1);
        continue;
      }
      ++used[g.nodes[i].latency_class];
      s.issue[i] = cycle;
      ++issued;
      ++done;
    }
    if (issued > 0 || next_ready == std::numeric_limits<int64_t>::max()) {
      ++cycle;
    } else {
      cycle = std::max(cycle + 1, next_ready);
    }
  }
  for (std::size_t i = 0; i < n; ++i) s.cycles = std::max(s.cycles, s.issue[i] + lat[i]);
  return s;
}

int64_t critical_path(const DepGraph& g, const SchedSpec& spec) {
  const std::size_t n = g.size();
  std::vector<int64_t> start(n, 0);
  std::vector<std::vector<int>> preds(n);
  for (const auto& e : g.true_edges) preds[static_cast<std::size_t>(e.to)].push_back(e.from);
  int64_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int p : preds[i]) {
      start[i] = std::max(start[i], start[static_cast<std::size_t>(p)] + spec.latency_of(g.nodes[static_cast<std::size_t>(p)]));
    }
    best = std::max(best, start[i] + spec.latency_of(g.nodes[i]));
  }
  return best;
}

FeatureContribution ilp_feature(const Cfg& cfg, const std::vector<LoopBlockMatch>& matches, const SchedSpec& spec) {
  FeatureContribution fc;
  const std::vector<int64_t> exec = block_exec_counts(cfg, matches);
  double total = 0;
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    if (cfg.blocks[b].insns.empty()) continue;
    const BlockSchedule s = schedule_block(build_deps(cfg.blocks[b], cfg.dialect), spec);
    total += static_cast<double>(s.cycles) * static_cast<double>(exec[b]);
  }
  fc.set("ilp_cycles", total);
  return fc;
}

}  // namespace loopcost
