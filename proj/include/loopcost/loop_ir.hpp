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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "loopcost/affine.hpp"

namespace loopcost {

enum class MemoryScope { kGlobal, kShared };
enum class AccessKind { kLoad, kStore };

struct TensorDecl {
  std::string name;
  std::vector<int64_t> dims;  // extent per dimension, in elements
  int elem_bytes = 4;
  MemoryScope scope = MemoryScope::kGlobal;

  int rank() const { return static_cast<int>(dims.size()); }
  int64_t num_elements() const;

  friend bool operator==(const TensorDecl&, const TensorDecl&) = default;
};

struct LoopAttrs {
  bool parallel = false;
  bool unrolled = false;
  int64_t vector_width = 0;  // 0 = not vectorized

  bool vectorized() const { return vector_width > 0; }
  friend bool operator==(const LoopAttrs&, const LoopAttrs&) = default;
};

struct Node;

/// A counted loop. The iteration variable takes the values 0, step, ..., (extent-1)*step.
struct LoopNode {
  std::string var;
  int64_t extent = 1;
  int64_t step = 1;
  LoopAttrs attrs;
  std::vector<Node> body;

  friend bool operator==(const LoopNode&, const LoopNode&);
};

struct AccessNode {
  std::string tensor;
  AccessKind kind = AccessKind::kLoad;
  std::vector<AffineExpr> index;  // one per tensor dimension

  friend bool operator==(const AccessNode&, const AccessNode&) = default;
};

struct Node {
  std::variant<LoopNode, AccessNode> content;

  Node(LoopNode l) : content(std::move(l)) {}      // NOLINT(google-explicit-constructor)
  Node(AccessNode a) : content(std::move(a)) {}    // NOLINT(google-explicit-constructor)

  bool is_loop() const { return std::holds_alternative<LoopNode>(content); }
  const LoopNode& loop() const { return std::get<LoopNode>(content); }
  LoopNode& loop() { return std::get<LoopNode>(content); }
  const AccessNode& access() const { return std::get<AccessNode>(content); }

  friend bool operator==(const Node& a, const Node& b) { return a.content == b.content; }
};

inline bool operator==(const LoopNode& a, const LoopNode& b) {
  return a.var == b.var && a.extent == b.extent && a.step == b.step && a.attrs == b.attrs && a.body == b.body;
}

/// Loop-nest tensor program: a forest of loops and accesses over declared tensors.
struct LoopProgram {
  std::vector<TensorDecl> tensors;
  std::vector<Node> body;

  const TensorDecl* find_tensor(std::string_view name) const;
  const TensorDecl& tensor(std::string_view name) const;

  friend bool operator==(const LoopProgram&, const LoopProgram&) = default;
};

/// Parses the JSON program format. Throws ParseError on JSON syntax errors and
/// Error on schema or validation failures.
LoopProgram parse_program(std::string_view text);
LoopProgram load_program(const std::string& path);

/// Canonical JSON form: every loop carries var, extent, step, attrs and body.
std::string serialize_program(const LoopProgram& p);

/// Structural checks (unique loop vars, bound index variables, ranks, bounds,
/// attribute rules). Throws Error.
void validate(const LoopProgram& p);

// --- traversal helpers -----------------------------------------------------

/// A loop together with its context during a walk.
struct LoopRef {
  const LoopNode* loop = nullptr;
  int depth = 0;
  int preorder_index = 0;
};

/// All loops in pre-order depth-first order.
std::vector<LoopRef> preorder_loops(const LoopProgram& p);

/// Loops that remain loops after code generation (neither unrolled nor
/// vectorized), in pre-order. With `skip_parallel`, thread-bound parallel
/// loops are dropped too (GPU lowering).
std::vector<LoopRef> emitted_loops(const LoopProgram& p, bool skip_parallel = false);

const LoopNode* find_loop(const LoopProgram& p, std::string_view var);

/// Visits every access with its chain of enclosing loops (outermost first).
void for_each_access(const LoopProgram& p,
                     const std::function<void(const AccessNode&, const std::vector<const LoopNode*>&)>& fn);

int count_accesses(const LoopProgram& p);

/// Number of dynamic executions of every access (product of enclosing extents),
/// in access pre-order.
std::vector<int64_t> access_volumes(const LoopProgram& p);

/// A loop is innermost when no loop appears anywhere below it.
bool has_loop_below(const LoopNode& l);

}  // namespace loopcost
