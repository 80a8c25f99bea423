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

#include "loopcost/loop_ir.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "loopcost/error.hpp"
#include "loopcost/json_util.hpp"

namespace loopcost {

using nlohmann::json;

int64_t TensorDecl::num_elements() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

const TensorDecl* LoopProgram::find_tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const TensorDecl& LoopProgram::tensor(std::string_view name) const {
  const TensorDecl* t = find_tensor(name);
  if (t == nullptr) throw Error("unknown tensor '" + std::string(name) + "'");
  return *t;
}

namespace {

LoopAttrs parse_attrs(const json& j) {
  LoopAttrs attrs;
  if (j.is_null()) return attrs;
  if (!j.is_array()) throw Error("loop attrs must be a list of strings");
  for (const auto& a : j) {
    if (!a.is_string()) throw Error("loop attrs must be a list of strings");
    const std::string s = a.get<std::string>();
    if (s == "parallel") {
      attrs.parallel = true;
    } else if (s == "unrolled") {
      attrs.unrolled = true;
    } else if (s.rfind("vectorized(", 0) == 0 && s.back() == ')') {
      std::string width = s.substr(11, s.size() - 12);
      try {
        std::size_t used = 0;
        attrs.vector_width = std::stoll(width, &used);
        if (used != width.size()) throw Error("");
      } catch (const std::exception&) {
        throw Error("bad vector width in attr '" + s + "'");
      }
      if (attrs.vector_width <= 0) throw Error("vector width must be positive in '" + s + "'");
    } else {
      throw Error("unknown loop attr '" + s + "'");
    }
  }
  return attrs;
}

json attrs_to_json(const LoopAttrs& attrs) {
  json out = json::array();
  if (attrs.parallel) out.push_back("parallel");
  if (attrs.unrolled) out.push_back("unrolled");
  if (attrs.vectorized()) out.push_back("vectorized(" + std::to_string(attrs.vector_width) + ")");
  return out;
}

Node parse_node(const json& j);

std::vector<Node> parse_body(const json& j) {
  std::vector<Node> body;
  if (j.is_null()) return body;
  if (!j.is_array()) throw Error("'body' must be a list of nodes");
  for (const auto& n : j) body.push_back(parse_node(n));
  return body;
}

Node parse_node(const json& j) {
  if (!j.is_object() || j.size() != 1) throw Error("node must be an object with a single 'loop' or 'access' key");
  if (j.contains("loop")) {
    const json& l = j.at("loop");
    LoopNode loop;
    loop.var = json_util::get_string(l, "var");
    loop.extent = json_util::get_static_int(l, "extent");
    loop.step = l.contains("step") ? json_util::get_static_int(l, "step") : 1;
    loop.attrs = parse_attrs(l.contains("attrs") ? l.at("attrs") : json());
    loop.body = parse_body(l.contains("body") ? l.at("body") : json());
    return loop;
  }
  if (j.contains("access")) {
    const json& a = j.at("access");
    AccessNode acc;
    acc.tensor = json_util::get_string(a, "tensor");
    const std::string kind = json_util::get_string(a, "kind");
    if (kind == "load") {
      acc.kind = AccessKind::kLoad;
    } else if (kind == "store") {
      acc.kind = AccessKind::kStore;
    } else {
      throw Error("access kind must be 'load' or 'store', got '" + kind + "'");
    }
    if (!a.contains("idx") || !a.at("idx").is_array()) throw Error("access needs an 'idx' list");
    for (const auto& e : a.at("idx")) {
      if (e.is_number_integer()) {
        acc.index.emplace_back(e.get<int64_t>());
      } else if (e.is_string()) {
        acc.index.push_back(AffineExpr::Parse(e.get<std::string>()));
      } else {
        throw Error("index expressions must be strings or integers");
      }
    }
    return acc;
  }
  throw Error("node must have a 'loop' or 'access' key");
}

json node_to_json(const Node& n) {
  if (n.is_loop()) {
    const LoopNode& l = n.loop();
    json body = json::array();
    for (const auto& c : l.body) body.push_back(node_to_json(c));
    json loop = json::object();
    loop["var"] = l.var;
    loop["extent"] = l.extent;
    loop["step"] = l.step;
    loop["attrs"] = attrs_to_json(l.attrs);
    loop["body"] = std::move(body);
    return json{{"loop", std::move(loop)}};
  }
  const AccessNode& a = n.access();
  json idx = json::array();
  for (const auto& e : a.index) idx.push_back(e.to_string());
  json acc = json::object();
  acc["tensor"] = a.tensor;
  acc["kind"] = a.kind == AccessKind::kLoad ? "load" : "store";
  acc["idx"] = std::move(idx);
  return json{{"access", std::move(acc)}};
}

struct Validator {
  const LoopProgram& p;
  std::set<std::string> loop_vars;
  std::vector<const LoopNode*> stack;

  void node(const Node& n) {
    if (n.is_loop()) {
      loop(n.loop());
    } else {
      access(n.access());
    }
  }

  void loop(const LoopNode& l) {
    if (!is_identifier(l.var)) throw Error("bad loop variable name '" + l.var + "'");
    if (p.find_tensor(l.var) != nullptr) throw Error("loop variable '" + l.var + "' shadows a tensor name");
    if (!loop_vars.insert(l.var).second) throw Error("duplicate loop variable '" + l.var + "'");
    if (l.extent <= 0) throw Error("loop '" + l.var + "' must have a positive extent");
    if (l.step <= 0) throw Error("loop '" + l.var + "' must have a positive step");
    if (l.attrs.vectorized()) {
      if (l.attrs.vector_width != l.extent) {
        throw Error("vectorized loop '" + l.var + "' must have extent equal to its vector width");
      }
      for (const auto& c : l.body) {
        if (c.is_loop()) throw Error("vectorized loop '" + l.var + "' may only contain accesses");
      }
    }
    if (l.attrs.parallel && (l.attrs.unrolled || l.attrs.vectorized())) {
      throw Error("loop '" + l.var + "' cannot be parallel and unrolled/vectorized");
    }
    if (l.attrs.unrolled && l.attrs.vectorized()) {
      throw Error("loop '" + l.var + "' cannot be both unrolled and vectorized");
    }
    if (l.attrs.unrolled) {
      for (const auto& c : l.body) {
        if (c.is_loop() && contains_emitted_loop(c.loop())) {
          throw Error("unrolled loop '" + l.var + "' may not contain loops that are still emitted");
        }
      }
    }
    stack.push_back(&l);
    for (const auto& c : l.body) node(c);
    stack.pop_back();
  }

  static bool contains_emitted_loop(const LoopNode& l) {
    if (!l.attrs.unrolled && !l.attrs.vectorized()) return true;
    return std::any_of(l.body.begin(), l.body.end(),
                       [](const Node& c) { return c.is_loop() && contains_emitted_loop(c.loop()); });
  }

  void access(const AccessNode& a) {
    const TensorDecl* t = p.find_tensor(a.tensor);
    if (t == nullptr) throw Error("access to undeclared tensor '" + a.tensor + "'");
    if (static_cast<int>(a.index.size()) != t->rank()) {
      throw Error("access to '" + a.tensor + "' has " + std::to_string(a.index.size()) +
                  " index expressions, tensor rank is " + std::to_string(t->rank()));
    }
    for (std::size_t d = 0; d < a.index.size(); ++d) {
      const AffineExpr& e = a.index[d];
      int64_t lo = e.constant();
      int64_t hi = e.constant();
      for (const auto& [var, c] : e.terms()) {
        auto it = std::find_if(stack.begin(), stack.end(), [&](const LoopNode* l) { return l->var == var; });
        if (it == stack.end()) {
          throw Error("index variable '" + var + "' in access to '" + a.tensor + "' is not bound by an enclosing loop");
        }
        int64_t span = c * ((*it)->extent - 1) * (*it)->step;
        lo += std::min<int64_t>(0, span);
        hi += std::max<int64_t>(0, span);
      }
      if (lo < 0 || hi >= t->dims[d]) {
        throw Error("access " + a.tensor + " dimension " + std::to_string(d) + " (" + e.to_string() +
                    ") ranges over [" + std::to_string(lo) + ", " + std::to_string(hi) + "], outside [0, " +
                    std::to_string(t->dims[d]) + ")");
      }
    }
  }
};

}  // namespace

LoopProgram parse_program(std::string_view text) {
  json j = json_util::parse_with_position(text);
  if (!j.is_object()) throw Error("program must be a JSON object");
  LoopProgram p;
  if (!j.contains("tensors") || !j.at("tensors").is_array()) throw Error("program needs a 'tensors' list");
  for (const auto& tj : j.at("tensors")) {
    TensorDecl t;
    t.name = json_util::get_string(tj, "name");
    if (!tj.contains("dims") || !tj.at("dims").is_array()) throw Error("tensor '" + t.name + "' needs 'dims'");
    for (const auto& d : tj.at("dims")) {
      if (!d.is_number_integer()) throw Error("tensor '" + t.name + "' dims must be static integers");
      t.dims.push_back(d.get<int64_t>());
    }
    t.elem_bytes = tj.contains("elem_bytes") ? static_cast<int>(json_util::get_static_int(tj, "elem_bytes")) : 4;
    if (tj.contains("scope")) {
      const std::string scope = json_util::get_string(tj, "scope");
      if (scope == "shared") {
        t.scope = MemoryScope::kShared;
      } else if (scope != "global") {
        throw Error("tensor scope must be 'global' or 'shared'");
      }
    }
    p.tensors.push_back(std::move(t));
  }
  p.body = parse_body(j.contains("body") ? j.at("body") : json());
  validate(p);
  return p;
}

LoopProgram load_program(const std::string& path) {
  return parse_program(json_util::read_file(path));
}

std::string serialize_program(const LoopProgram& p) {
  json tensors = json::array();
  for (const auto& t : p.tensors) {
    json tj = json::object();
    tj["name"] = t.name;
    tj["dims"] = t.dims;
    tj["elem_bytes"] = t.elem_bytes;
    if (t.scope == MemoryScope::kShared) tj["scope"] = "shared";
    tensors.push_back(std::move(tj));
  }
  json body = json::array();
  for (const auto& n : p.body) body.push_back(node_to_json(n));
  json out = json::object();
  out["tensors"] = std::move(tensors);
  out["body"] = std::move(body);
  return out.dump(2) + "\n";
}

void validate(const LoopProgram& p) {
  std::set<std::string> names;
  for (const auto& t : p.tensors) {
    if (!is_identifier(t.name)) throw Error("bad tensor name '" + t.name + "'");
    if (!names.insert(t.name).second) throw Error("duplicate tensor '" + t.name + "'");
    if (t.dims.empty()) throw Error("tensor '" + t.name + "' must have at least one dimension");
    for (int64_t d : t.dims) {
      if (d <= 0) throw Error("tensor '" + t.name + "' has a non-positive dimension");
    }
    if (t.elem_bytes <= 0) throw Error("tensor '" + t.name + "' must have positive elem_bytes");
  }
  Validator v{p, {}, {}};
  for (const auto& n : p.body) v.node(n);
}

namespace {

void collect_loops(const std::vector<Node>& body, int depth, std::vector<LoopRef>& out) {
  for (const auto& n : body) {
    if (!n.is_loop()) continue;
    out.push_back({&n.loop(), depth, static_cast<int>(out.size())});
    collect_loops(n.loop().body, depth + 1, out);
  }
}

void walk_accesses(const std::vector<Node>& body, std::vector<const LoopNode*>& stack,
                   const std::function<void(const AccessNode&, const std::vector<const LoopNode*>&)>& fn) {
  for (const auto& n : body) {
    if (n.is_loop()) {
      stack.push_back(&n.loop());
      walk_accesses(n.loop().body, stack, fn);
      stack.pop_back();
    } else {
      fn(n.access(), stack);
    }
  }
}

}  // namespace

std::vector<LoopRef> preorder_loops(const LoopProgram& p) {
  std::vector<LoopRef> out;
  collect_loops(p.body, 0, out);
  return out;
}

std::vector<LoopRef> emitted_loops(const LoopProgram& p, bool skip_parallel) {
  std::vector<LoopRef> out;
  for (const auto& ref : preorder_loops(p)) {
    const LoopAttrs& a = ref.loop->attrs;
    if (a.unrolled || a.vectorized()) continue;
    if (skip_parallel && a.parallel) continue;
    out.push_back(ref);
  }
  return out;
}

const LoopNode* find_loop(const LoopProgram& p, std::string_view var) {
  for (const auto& ref : preorder_loops(p)) {
    if (ref.loop->var == var) return ref.loop;
  }
  return nullptr;
}

void for_each_access(const LoopProgram& p,
                     const std::function<void(const AccessNode&, const std::vector<const LoopNode*>&)>& fn) {
  std::vector<const LoopNode*> stack;
  walk_accesses(p.body, stack, fn);
}

int count_accesses(const LoopProgram& p) {
  int n = 0;
  for_each_access(p, [&](const AccessNode&, const std::vector<const LoopNode*>&) { ++n; });
  return n;
}

std::vector<int64_t> access_volumes(const LoopProgram& p) {
  std::vector<int64_t> out;
  for_each_access(p, [&](const AccessNode&, const std::vector<const LoopNode*>& loops) {
    int64_t v = 1;
    for (const LoopNode* l : loops) v *= l->extent;
    out.push_back(v);
  });
  return out;
}

bool has_loop_below(const LoopNode& l) {
  return std::any_of(l.body.begin(), l.body.end(), [](const Node& c) { return c.is_loop(); });
}

}  // namespace loopcost
