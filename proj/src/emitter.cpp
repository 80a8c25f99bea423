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

#include "loopcost/emitter.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "loopcost/error.hpp"

namespace loopcost {

namespace {

constexpr const char* kX86Counters[] = {"r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15"};
constexpr const char* kX86Bases[] = {"rdi", "rsi", "rdx", "rax", "rbx", "rcx", "rbp"};
constexpr int kVecRegs = 16;

struct Statement {
  std::vector<const AccessNode*> loads;
  const AccessNode* store = nullptr;
};

class Emitter {
 public:
  Emitter(const LoopProgram& p, Target t) : p_(p), target_(t) {
    for (std::size_t i = 0; i < p.tensors.size(); ++i) base_index_[p.tensors[i].name] = static_cast<int>(i);
  }

  std::string run() {
    prologue();
    body(p_.body, Ctx{});
    epilogue();
    return out_.str();
  }

 private:
  struct Ctx {
    int depth = 0;             // emitted-loop nesting depth
    std::string index_reg;     // innermost emitted loop counter
    bool vector = false;
  };

  // --- structure -----------------------------------------------------------

  void body(const std::vector<Node>& nodes, const Ctx& ctx) {
    std::vector<const AccessNode*> pending;
    for (const auto& n : nodes) {
      if (n.is_loop()) {
        flush(pending, ctx);
        loop(n.loop(), ctx);
      } else {
        pending.push_back(&n.access());
      }
    }
    flush(pending, ctx);
  }

  void flush(std::vector<const AccessNode*>& pending, const Ctx& ctx) {
    Statement st;
    for (const AccessNode* a : pending) {
      if (a->kind == AccessKind::kLoad) {
        st.loads.push_back(a);
      } else {
        st.store = a;
        statement(st, ctx);
        st = Statement{};
      }
    }
    if (!st.loads.empty()) statement(st, ctx);
    pending.clear();
  }

  void loop(const LoopNode& l, const Ctx& ctx) {
    if (l.attrs.vectorized()) {
      Ctx inner = ctx;
      if (target_ == Target::kPtx) {
        comment("vectorized " + l.var + " x" + std::to_string(l.extent) + " (lanes replicated)");
        for (int64_t k = 0; k < l.extent; ++k) body(l.body, inner);
      } else {
        comment("vectorized " + l.var + " x" + std::to_string(l.attrs.vector_width));
        inner.vector = true;
        body(l.body, inner);
      }
      return;
    }
    if (l.attrs.unrolled) {
      comment("unrolled " + l.var + " x" + std::to_string(l.extent));
      for (int64_t k = 0; k < l.extent; ++k) body(l.body, ctx);
      return;
    }
    if (target_ == Target::kPtx && l.attrs.parallel) {
      const char* src = thread_dims_ == 0 ? "%tid.x" : thread_dims_ == 1 ? "%ctaid.x" : "%tid.y";
      ++thread_dims_;
      std::string reg = "%r" + std::to_string(100 + thread_dims_);
      insn("mov.u32", reg + ", " + src);
      comment("parallel " + l.var + " bound to " + src);
      Ctx inner = ctx;
      inner.index_reg = reg;
      body(l.body, inner);
      return;
    }
    counted_loop(l, ctx);
  }

  void counted_loop(const LoopNode& l, const Ctx& ctx) {
    const std::string label = next_label();
    const int64_t bound = l.extent * l.step;
    std::string counter;
    switch (target_) {
      case Target::kX86:
        counter = std::string("%") + kX86Counters[ctx.depth % 8];
        insn("movq", "$0, " + counter);
        break;
      case Target::kAArch64:
        counter = "x" + std::to_string(8 + ctx.depth % 8);
        insn("mov", counter + ", #0");
        break;
      case Target::kPtx:
        counter = "%r" + std::to_string(1 + ctx.depth);
        insn("mov.u32", counter + ", 0");
        break;
    }
    out_ << label << ":";
    if (l.attrs.parallel) out_ << (target_ == Target::kX86 ? "  # parallel " : "  // parallel ") << l.var;
    out_ << "\n";
    Ctx inner = ctx;
    inner.depth = ctx.depth + 1;
    inner.index_reg = counter;
    body(l.body, inner);
    switch (target_) {
      case Target::kX86:
        insn("addq", "$" + std::to_string(l.step) + ", " + counter);
        insn("cmpq", "$" + std::to_string(bound) + ", " + counter);
        insn("jne", label);
        break;
      case Target::kAArch64:
        insn("add", counter + ", " + counter + ", #" + std::to_string(l.step));
        insn("cmp", counter + ", #" + std::to_string(bound));
        insn("b.ne", label);
        break;
      case Target::kPtx: {
        const std::string pred = "%p" + std::to_string(1 + ctx.depth);
        insn("add.s32", counter + ", " + counter + ", " + std::to_string(l.step));
        insn("setp.lt.s32", pred + ", " + counter + ", " + std::to_string(bound));
        out_ << "\t@" << pred << " bra \t" << label << ";\n";
        break;
      }
    }
  }

  // --- statements ----------------------------------------------------------

  void statement(const Statement& st, const Ctx& ctx) {
    std::vector<int> regs;
    int acc = -1;
    for (const AccessNode* a : st.loads) {
      int r = next_vreg();
      regs.push_back(r);
      load(*a, r, ctx);
      if (acc < 0 && st.store != nullptr && a->tensor == st.store->tensor) acc = r;
    }
    int result = regs.empty() ? next_vreg() : regs.back();
    if (st.loads.size() >= 2) {
      if (acc < 0) acc = regs.front();
      std::vector<int> others;
      for (int r : regs) {
        if (r != acc) others.push_back(r);
      }
      int m1 = others.at(0);
      int m2 = others.size() > 1 ? others[1] : others[0];
      fma(acc, m1, m2, ctx);
      result = acc;
    }
    if (st.store != nullptr) store(*st.store, result, ctx);
  }

  void load(const AccessNode& a, int reg, const Ctx& ctx) {
    switch (target_) {
      case Target::kX86:
        insn(ctx.vector ? "vmovups" : "vmovss", x86_mem(a, ctx) + ", " + x86_vreg(reg, ctx));
        break;
      case Target::kAArch64:
        insn("ldr", a64_vreg(reg, ctx) + ", " + a64_mem(a, ctx));
        break;
      case Target::kPtx:
        insn(ptx_space("ld", a), "%f" + std::to_string(reg) + ", " + ptx_mem(a));
        break;
    }
  }

  void store(const AccessNode& a, int reg, const Ctx& ctx) {
    switch (target_) {
      case Target::kX86:
        insn(ctx.vector ? "vmovups" : "vmovss", x86_vreg(reg, ctx) + ", " + x86_mem(a, ctx));
        break;
      case Target::kAArch64:
        insn("str", a64_vreg(reg, ctx) + ", " + a64_mem(a, ctx));
        break;
      case Target::kPtx:
        insn(ptx_space("st", a), ptx_mem(a) + ", %f" + std::to_string(reg));
        break;
    }
  }

  void fma(int acc, int m1, int m2, const Ctx& ctx) {
    switch (target_) {
      case Target::kX86:
        insn(ctx.vector ? "vfmadd231ps" : "vfmadd231ss",
             x86_vreg(m1, ctx) + ", " + x86_vreg(m2, ctx) + ", " + x86_vreg(acc, ctx));
        break;
      case Target::kAArch64:
        if (ctx.vector) {
          insn("fmla", "v" + std::to_string(acc) + ".4s, v" + std::to_string(m1) + ".4s, v" + std::to_string(m2) + ".4s");
        } else {
          insn("fmla", "s" + std::to_string(acc) + ", s" + std::to_string(m1) + ", v" + std::to_string(m2) + ".s[0]");
        }
        break;
      case Target::kPtx:
        insn("fma.rn.f32", "%f" + std::to_string(acc) + ", %f" + std::to_string(m1) + ", %f" + std::to_string(m2) +
                               ", %f" + std::to_string(acc));
        break;
    }
  }

  std::string x86_mem(const AccessNode& a, const Ctx& ctx) const {
    std::string base = std::string("%") + kX86Bases[base_of(a) % 7];
    if (ctx.index_reg.empty()) return "(" + base + ")";
    return "(" + base + "," + ctx.index_reg + ",4)";
  }
  static std::string x86_vreg(int r, const Ctx& ctx) { return (ctx.vector ? "%ymm" : "%xmm") + std::to_string(r); }

  std::string a64_mem(const AccessNode& a, const Ctx& ctx) const {
    std::string base = "x" + std::to_string(base_of(a) % 8);
    if (ctx.index_reg.empty()) return "[" + base + "]";
    return "[" + base + ", " + ctx.index_reg + ", lsl #2]";
  }
  static std::string a64_vreg(int r, const Ctx& ctx) { return (ctx.vector ? "q" : "s") + std::to_string(r); }

  std::string ptx_space(const char* op, const AccessNode& a) const {
    const bool shared = p_.tensor(a.tensor).scope == MemoryScope::kShared;
    return std::string(op) + (shared ? ".shared.f32" : ".global.f32");
  }
  std::string ptx_mem(const AccessNode& a) const { return "[%rd" + std::to_string(1 + base_of(a)) + "]"; }

  int base_of(const AccessNode& a) const { return base_index_.at(a.tensor); }

  // --- text ----------------------------------------------------------------

  void prologue() {
    switch (target_) {
      case Target::kX86:
        out_ << "# loopcost mock code generator, x86-64 AT&T syntax\n\t.text\n\t.globl\tkernel\nkernel:\n";
        break;
      case Target::kAArch64:
        out_ << "// loopcost mock code generator, AArch64\n\t.text\n\t.globl\tkernel\nkernel:\n";
        break;
      case Target::kPtx: {
        out_ << "//\n// loopcost mock code generator, PTX\n//\n\n.version 7.0\n.target sm_70\n.address_size 64\n\n";
        out_ << ".visible .entry kernel(\n";
        for (std::size_t i = 0; i < p_.tensors.size(); ++i) {
          out_ << "\t.param .u64 kernel_param_" << i << (i + 1 < p_.tensors.size() ? ",\n" : "\n");
        }
        out_ << ")\n{\n\t.reg .pred \t%p<16>;\n\t.reg .f32 \t%f<16>;\n\t.reg .b32 \t%r<128>;\n\t.reg .b64 \t%rd<"
             << p_.tensors.size() + 1 << ">;\n\n";
        for (std::size_t i = 0; i < p_.tensors.size(); ++i) {
          if (p_.tensors[i].scope == MemoryScope::kShared) continue;
          insn("ld.param.u64", "%rd" + std::to_string(i + 1) + ", [kernel_param_" + std::to_string(i) + "]");
        }
        break;
      }
    }
  }

  void epilogue() {
    if (target_ == Target::kPtx) out_ << "\tret;\n}\n";
  }

  void insn(const std::string& op, const std::string& operands) {
    out_ << "\t" << op << " \t" << operands << (target_ == Target::kPtx ? ";" : "") << "\n";
  }

  void comment(const std::string& text) { out_ << (target_ == Target::kX86 ? "\t# " : "\t// ") << text << "\n"; }

  std::string next_label() {
    const std::string n = std::to_string(++labels_);
    return target_ == Target::kPtx ? "$L__BB0_" + n : ".LBB0_" + n;
  }

  int next_vreg() {
    int r = vreg_ % kVecRegs;
    ++vreg_;
    return r;
  }

  const LoopProgram& p_;
  Target target_;
  std::map<std::string, int> base_index_;
  std::ostringstream out_;
  int labels_ = 0;
  int vreg_ = 0;
  int thread_dims_ = 0;
};

}  // namespace

std::string emit_mock_code(const LoopProgram& p, Target target) { return Emitter(p, target).run(); }

}  // namespace loopcost
