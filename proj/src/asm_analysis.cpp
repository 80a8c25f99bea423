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

#include "loopcost/asm_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "loopcost/error.hpp"

namespace loopcost {

Dialect dialect_for(Target t) {
  switch (t) {
    case Target::kX86:
      return Dialect::kX86Att;
    case Target::kAArch64:
      return Dialect::kAArch64;
    case Target::kPtx:
      return Dialect::kPtx;
  }
  throw InternalError("unknown target");
}

std::string_view insn_class_name(InsnClass c) {
  switch (c) {
    case InsnClass::kSimdArith:
      return "simd_arith";
    case InsnClass::kSimdMem:
      return "simd_mem";
    case InsnClass::kScalar:
      return "scalar";
    case InsnClass::kControl:
      return "control";
    case InsnClass::kOther:
      return "other";
  }
  return "other";
}

int Cfg::block_of_label(std::string_view label) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].label.empty() && blocks[i].label == label) return static_cast<int>(i);
  }
  return -1;
}

std::size_t Cfg::num_instructions() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.insns.size();
  return n;
}

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

bool any_prefix(std::string_view s, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return starts_with(s, p); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_comment(std::string_view line, Dialect d, bool& in_block_comment) {
  std::string out;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (in_block_comment) {
      if (line.substr(i, 2) == "*/") {
        in_block_comment = false;
        ++i;
      }
      continue;
    }
    if (line.substr(i, 2) == "/*") {
      in_block_comment = true;
      ++i;
      continue;
    }
    if (line.substr(i, 2) == "//") break;
    if (line[i] == '#' && d == Dialect::kX86Att) break;
    out.push_back(line[i]);
  }
  return out;
}

bool is_label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

const std::vector<std::string> kX86Scalar = {"add", "sub", "mov", "cmp", "lea", "inc", "dec", "imul", "xor",
                                             "and", "or",  "shl", "shr", "sar", "test", "neg", "not", "push", "pop"};
const std::vector<std::string> kA64Scalar = {"add", "sub", "mov", "cmp", "cmn", "mul", "madd", "lsl", "lsr",
                                             "asr", "and", "orr", "eor", "adrp", "adr", "subs", "adds", "neg"};
const std::vector<std::string> kPtxScalar = {"add.s", "add.u", "sub.s", "sub.u", "mul.lo", "mul.wide", "mad.lo",
                                             "mov", "setp", "cvt", "shl", "shr", "and", "or", "selp"};

}  // namespace

InsnClass classify(std::string_view m, Dialect d) {
  switch (d) {
    case Dialect::kX86Att:
      if (starts_with(m, "j") || m == "call" || m == "callq" || m == "ret" || m == "retq") return InsnClass::kControl;
      if (starts_with(m, "vfmadd") || starts_with(m, "vfmsub") || starts_with(m, "vfnmadd") ||
          starts_with(m, "vadd") || starts_with(m, "vmul") || starts_with(m, "vsub") || starts_with(m, "vdiv") ||
          starts_with(m, "vmax") || starts_with(m, "vmin") || starts_with(m, "vxor")) {
        return InsnClass::kSimdArith;
      }
      if (starts_with(m, "vmov") || starts_with(m, "vbroadcast") || starts_with(m, "vgather") ||
          starts_with(m, "vpermil")) {
        return InsnClass::kSimdMem;
      }
      if (any_prefix(m, kX86Scalar)) return InsnClass::kScalar;
      return InsnClass::kOther;
    case Dialect::kAArch64:
      if (m == "b" || starts_with(m, "b.") || m == "bl" || m == "br" || m == "blr" || m == "ret" || m == "cbz" ||
          m == "cbnz" || m == "tbz" || m == "tbnz") {
        return InsnClass::kControl;
      }
      if (starts_with(m, "fmla") || starts_with(m, "fmls") || starts_with(m, "fmadd") || starts_with(m, "fadd") ||
          starts_with(m, "fmul") || starts_with(m, "fsub") || starts_with(m, "fmax") || starts_with(m, "fmin")) {
        return InsnClass::kSimdArith;
      }
      if (starts_with(m, "ld") || starts_with(m, "st")) return InsnClass::kSimdMem;
      if (any_prefix(m, kA64Scalar)) return InsnClass::kScalar;
      return InsnClass::kOther;
    case Dialect::kPtx:
      if (starts_with(m, "bra") || m == "ret" || m == "exit" || starts_with(m, "call")) return InsnClass::kControl;
      if (starts_with(m, "fma") || starts_with(m, "mad.rn") || starts_with(m, "add.f") || starts_with(m, "mul.f") ||
          starts_with(m, "sub.f") || starts_with(m, "add.rn") || starts_with(m, "mul.rn")) {
        return InsnClass::kSimdArith;
      }
      if (starts_with(m, "ld.") || starts_with(m, "st.")) return InsnClass::kSimdMem;
      if (any_prefix(m, kPtxScalar)) return InsnClass::kScalar;
      return InsnClass::kOther;
  }
  return InsnClass::kOther;
}

std::vector<std::string> split_operands(std::string_view text) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.emplace_back(trim(cur));
  return out;
}

std::optional<int64_t> parse_immediate(std::string_view op) {
  op = trim(op);
  if (!op.empty() && (op.front() == '$' || op.front() == '#')) op.remove_prefix(1);
  if (op.empty()) return std::nullopt;
  bool neg = false;
  if (op.front() == '-') {
    neg = true;
    op.remove_prefix(1);
  }
  int base = 10;
  if (starts_with(op, "0x") || starts_with(op, "0X")) {
    base = 16;
    op.remove_prefix(2);
  }
  if (op.empty()) return std::nullopt;
  int64_t v = 0;
  for (char c : op) {
    int digit;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = c - '0';
    } else if (base == 16 && std::isxdigit(static_cast<unsigned char>(c))) {
      digit = std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
    } else {
      return std::nullopt;
    }
    v = v * base + digit;
  }
  return neg ? -v : v;
}

ControlInfo control_info(const Instruction& insn, Dialect d) {
  ControlInfo ci;
  const std::string& m = insn.mnemonic;
  auto op = [&](std::size_t i) -> std::optional<std::string> {
    if (i < insn.operands.size()) return insn.operands[i];
    return std::nullopt;
  };
  switch (d) {
    case Dialect::kX86Att:
      if (m == "jmp" || m == "jmpq") {
        ci = {true, false, op(0)};
      } else if (starts_with(m, "j")) {
        ci = {true, true, op(0)};
      } else if (m == "ret" || m == "retq") {
        ci = {true, false, std::nullopt};
      }
      break;
    case Dialect::kAArch64:
      if (m == "b") {
        ci = {true, false, op(0)};
      } else if (starts_with(m, "b.")) {
        ci = {true, true, op(0)};
      } else if (m == "cbz" || m == "cbnz") {
        ci = {true, true, op(1)};
      } else if (m == "tbz" || m == "tbnz") {
        ci = {true, true, op(2)};
      } else if (m == "ret" || m == "br") {
        ci = {true, false, std::nullopt};
      }
      break;
    case Dialect::kPtx:
      if (starts_with(m, "bra")) {
        ci = {true, !insn.predicate.empty(), op(0)};
      } else if (m == "ret" || m == "exit") {
        ci = {true, false, std::nullopt};
      }
      break;
  }
  return ci;
}

Cfg parse_asm(std::string_view text, Dialect dialect) {
  Cfg cfg;
  cfg.dialect = dialect;
  bool in_block_comment = false;
  bool any_content = false;
  bool split_next = true;  // start a new block before the next instruction
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto open_block = [&](std::string label, std::size_t line) {
    BasicBlock b;
    b.label = std::move(label);
    b.first_line = line;
    b.last_line = line;
    cfg.blocks.push_back(std::move(b));
    split_next = false;
  };

  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    std::string stripped = strip_comment(raw, dialect, in_block_comment);
    std::string_view line = trim(stripped);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    any_content = true;

    // Leading labels ("name:"), possibly followed by an instruction.
    for (;;) {
      std::size_t k = 0;
      while (k < line.size() && is_label_char(line[k])) ++k;
      if (k > 0 && k < line.size() && line[k] == ':') {
        open_block(std::string(line.substr(0, k)), line_no);
        line = trim(line.substr(k + 1));
        continue;
      }
      break;
    }
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '.' || line.front() == '{' || line.front() == '}' || line.front() == ')') {
      if (end == text.size()) break;
      continue;  // directive or PTX structural line
    }
    if (dialect == Dialect::kPtx && line.back() != ';') {
      if (end == text.size()) break;
      continue;  // declarations spanning lines such as ".visible .entry k("
    }
    if (!line.empty() && line.back() == ';') line.remove_suffix(1);

    Instruction insn;
    insn.line = line_no;
    if (line.front() == '@') {
      std::size_t sp = line.find_first_of(" \t");
      insn.predicate = std::string(line.substr(1, sp - 1));
      line = trim(line.substr(sp));
    }
    std::size_t sp = line.find_first_of(" \t");
    insn.mnemonic = std::string(line.substr(0, sp));
    if (sp != std::string_view::npos) insn.operands = split_operands(line.substr(sp + 1));
    insn.cls = classify(insn.mnemonic, dialect);

    if (split_next || cfg.blocks.empty()) open_block("", line_no);
    BasicBlock& cur = cfg.blocks.back();
    cur.insns.push_back(insn);
    cur.last_line = line_no;
    if (control_info(insn, dialect).transfer) split_next = true;
    if (end == text.size()) break;
  }
  if (!any_content) throw Error("empty assembly input");

  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const BasicBlock& b = cfg.blocks[i];
    const int from = static_cast<int>(i);
    const bool has_next = i + 1 < cfg.blocks.size();
    if (b.insns.empty()) {
      if (has_next) cfg.edges.push_back({from, from + 1, EdgeKind::kFallthrough});
      continue;
    }
    ControlInfo ci = control_info(b.insns.back(), dialect);
    if (!ci.transfer) {
      if (has_next) cfg.edges.push_back({from, from + 1, EdgeKind::kFallthrough});
      continue;
    }
    if (ci.target) {
      int to = cfg.block_of_label(*ci.target);
      if (to < 0) {
        throw Error("jump to undefined label '" + *ci.target + "' at line " + std::to_string(b.insns.back().line));
      }
      cfg.edges.push_back({from, to, ci.conditional ? EdgeKind::kCondJump : EdgeKind::kJump});
    }
    if (ci.conditional && has_next) cfg.edges.push_back({from, from + 1, EdgeKind::kFallthrough});
  }
  return cfg;
}

std::vector<LoopBlock> identify_loop_blocks(const Cfg& cfg) {
  std::map<int, int> latch_of;
  for (const auto& e : cfg.edges) {
    if (e.kind == EdgeKind::kFallthrough) continue;
    if (e.to <= e.from) {
      auto [it, inserted] = latch_of.emplace(e.to, e.from);
      if (!inserted) it->second = std::max(it->second, e.from);
    }
  }
  std::vector<LoopBlock> out;
  for (const auto& [block, latch] : latch_of) out.push_back({block, latch});
  return out;
}

namespace {

// Resolves a register operand to the constant of the closest preceding
// `mov $imm, reg` (x86) / `mov reg, #imm` (AArch64).
std::optional<int64_t> resolve_register(const Cfg& cfg, int block, std::size_t insn_idx, const std::string& reg) {
  for (int b = block; b >= 0; --b) {
    const auto& insns = cfg.blocks[static_cast<std::size_t>(b)].insns;
    std::size_t i = b == block ? insn_idx : insns.size();
    while (i-- > 0) {
      const Instruction& in = insns[i];
      if (!starts_with(in.mnemonic, "mov") || in.operands.size() != 2) continue;
      if (cfg.dialect == Dialect::kX86Att && in.operands[1] == reg) return parse_immediate(in.operands[0]);
      if (cfg.dialect == Dialect::kAArch64 && in.operands[0] == reg) return parse_immediate(in.operands[1]);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<int64_t> loop_bound(const Cfg& cfg, const LoopBlock& lb) {
  const BasicBlock& latch = cfg.blocks.at(static_cast<std::size_t>(lb.latch));
  if (latch.insns.empty()) return std::nullopt;
  for (std::size_t i = latch.insns.size() - 1; i-- > 0;) {
    const Instruction& in = latch.insns[i];
    const bool is_cmp = starts_with(in.mnemonic, "cmp") || (cfg.dialect == Dialect::kAArch64 && in.mnemonic == "subs");
    if (!is_cmp || in.operands.size() < 2) continue;
    // AT&T puts the immediate first; AArch64 last.
    const std::string& imm_op = cfg.dialect == Dialect::kX86Att ? in.operands[0] : in.operands.back();
    if (auto v = parse_immediate(imm_op)) return v;
    return resolve_register(cfg, lb.latch, i, imm_op);
  }
  return std::nullopt;
}

LoopMapResult loop_map(const LoopProgram& ir, const Cfg& cfg) {
  LoopMapResult result;
  const std::vector<LoopRef> for_loops = emitted_loops(ir, cfg.dialect == Dialect::kPtx);
  const std::vector<LoopBlock> candidates = identify_loop_blocks(cfg);
  std::size_t matched_idx = 0;
  for (const LoopBlock& lb : candidates) {
    if (matched_idx >= for_loops.size()) {
      result.diagnostics.push_back("loop block at line " +
                                   std::to_string(cfg.blocks[static_cast<std::size_t>(lb.block)].first_line) +
                                   " has no IR loop left to match");
      continue;
    }
    const LoopNode& l = *for_loops[matched_idx].loop;
    std::optional<int64_t> bound = loop_bound(cfg, lb);
    if (bound && (*bound == l.extent || *bound == l.extent * l.step)) {
      result.matches.push_back({for_loops[matched_idx].preorder_index, l.var, lb, l.extent});
      ++matched_idx;
    } else {
      result.diagnostics.push_back("loop block at line " +
                                   std::to_string(cfg.blocks[static_cast<std::size_t>(lb.block)].first_line) +
                                   " does not match IR loop '" + l.var + "'");
    }
  }
  for (std::size_t k = matched_idx; k < for_loops.size(); ++k) {
    result.diagnostics.push_back("IR loop '" + for_loops[k].loop->var + "' has no matching loop block");
  }
  return result;
}

std::vector<int64_t> block_exec_counts(const Cfg& cfg, const std::vector<LoopBlockMatch>& matches) {
  std::vector<int64_t> counts(cfg.blocks.size(), 1);
  for (const auto& m : matches) {
    for (int b = m.block.block; b <= m.block.latch; ++b) counts[static_cast<std::size_t>(b)] *= m.trip_count;
  }
  return counts;
}

SimdPatterns SimdPatterns::defaults(Target t) {
  SimdPatterns p;
  switch (t) {
    case Target::kX86:
      p.fma = {"vfmadd"};
      p.move = {"vmov"};
      break;
    case Target::kAArch64:
      p.fma = {"fmla"};
      p.load = {"ld"};
      p.store = {"st"};
      break;
    case Target::kPtx:
      p.fma = {"fma"};
      p.load = {"ld.global", "ld.shared", "ld.local", "ld.const"};
      p.store = {"st.global", "st.shared", "st.local"};
      break;
  }
  return p;
}

namespace {

bool is_memory_operand(std::string_view op) {
  return op.find('(') != std::string_view::npos || op.find('[') != std::string_view::npos;
}

}  // namespace

FeatureContribution count_simd(const LoopProgram& ir, const Cfg& cfg, const std::vector<LoopBlockMatch>& matches,
                               Target target, const SimdPatterns& patterns) {
  if (dialect_for(target) != cfg.dialect) throw Error("count_simd: target does not match the code dialect");
  FeatureContribution fc;
  double n_fma = 0;
  double n_load = 0;
  double n_store = 0;
  const std::vector<int64_t> exec = block_exec_counts(cfg, matches);
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    const double w = static_cast<double>(exec[b]);
    for (const auto& in : cfg.blocks[b].insns) {
      const std::string& m = in.mnemonic;
      if (any_prefix(m, patterns.fma)) {
        n_fma += w;
      } else if (any_prefix(m, patterns.move)) {
        if (!in.operands.empty() && is_memory_operand(in.operands.front())) {
          n_load += w;
        } else if (!in.operands.empty() && is_memory_operand(in.operands.back())) {
          n_store += w;
        }
      } else if (any_prefix(m, patterns.load)) {
        n_load += w;
      } else if (any_prefix(m, patterns.store)) {
        n_store += w;
      }
    }
  }
  fc.set("n_fma", n_fma);
  fc.set("n_vload", n_load);
  fc.set("n_vstore", n_store);
  const std::size_t emitted = emitted_loops(ir, target == Target::kPtx).size();
  if (matches.size() != emitted) {
    fc.diagnostics.push_back("matched " + std::to_string(matches.size()) + " of " + std::to_string(emitted) +
                             " emitted IR loops; unmatched loops count once");
  }
  return fc;
}

FeatureContribution count_simd(const LoopProgram& ir, const Cfg& cfg, const std::vector<LoopBlockMatch>& matches,
                               Target target) {
  return count_simd(ir, cfg, matches, target, SimdPatterns::defaults(target));
}

}  // namespace loopcost
