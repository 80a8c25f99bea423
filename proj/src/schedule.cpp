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

#include "loopcost/schedule.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "loopcost/error.hpp"
#include "loopcost/json_util.hpp"

namespace loopcost {

using nlohmann::json;

std::string outer_name(std::string_view var) { return std::string(var) + "_o"; }
std::string inner_name(std::string_view var) { return std::string(var) + "_i"; }

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Finds the vector holding the loop `var` and its position in it.
bool locate(std::vector<Node>& body, std::string_view var, std::vector<Node>*& owner, std::size_t& pos) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (!body[i].is_loop()) continue;
    if (body[i].loop().var == var) {
      owner = &body;
      pos = i;
      return true;
    }
    if (locate(body[i].loop().body, var, owner, pos)) return true;
  }
  return false;
}

LoopNode& require_loop(LoopProgram& p, std::string_view var, std::vector<Node>*& owner, std::size_t& pos) {
  if (!locate(p.body, var, owner, pos)) throw Error("schedule references unknown loop '" + std::string(var) + "'");
  return (*owner)[pos].loop();
}

void substitute(std::vector<Node>& body, std::string_view var, const AffineExpr& repl) {
  for (auto& n : body) {
    if (n.is_loop()) {
      substitute(n.loop().body, var, repl);
    } else {
      auto& acc = std::get<AccessNode>(n.content);
      for (auto& e : acc.index) e = e.substitute(var, repl);
    }
  }
}

// Splits loop `var` into var_o (extent/factor) and var_i (factor).
LoopNode& split(LoopProgram& p, std::string_view var, int64_t factor, const char* what) {
  std::vector<Node>* owner = nullptr;
  std::size_t pos = 0;
  LoopNode& l = require_loop(p, var, owner, pos);
  if (factor < 1 || factor > l.extent) {
    throw Error(std::string(what) + " factor " + std::to_string(factor) + " out of range [1, " +
                std::to_string(l.extent) + "] for loop '" + l.var + "'");
  }
  if (l.extent % factor != 0) {
    throw Error(std::string(what) + " factor " + std::to_string(factor) + " does not divide extent " +
                std::to_string(l.extent) + " of loop '" + l.var + "'");
  }
  const std::string on = outer_name(l.var);
  const std::string in = inner_name(l.var);
  if (find_loop(p, on) != nullptr || find_loop(p, in) != nullptr || p.find_tensor(on) || p.find_tensor(in)) {
    throw Error("cannot split loop '" + l.var + "': generated name already in use");
  }
  LoopNode inner;
  inner.var = in;
  inner.extent = factor;
  inner.step = l.step;
  inner.attrs.unrolled = l.attrs.unrolled;
  inner.body = std::move(l.body);
  AffineExpr repl = AffineExpr::Var(on);
  repl.add_term(in, 1);
  substitute(inner.body, l.var, repl);

  LoopNode outer;
  outer.var = on;
  outer.extent = l.extent / factor;
  outer.step = l.step * factor;
  outer.attrs.parallel = l.attrs.parallel;
  outer.attrs.unrolled = l.attrs.unrolled;
  outer.body.emplace_back(std::move(inner));
  (*owner)[pos] = Node(std::move(outer));
  return (*owner)[pos].loop().body.front().loop();
}

void apply_tile(LoopProgram& p, const Tile& t) {
  if (const LoopNode* l = find_loop(p, t.loop); l != nullptr && l->attrs.vectorized()) {
    throw Error("cannot tile vectorized loop '" + t.loop + "'");
  }
  split(p, t.loop, t.factor, "tile");
}

void apply_vectorize(LoopProgram& p, const Vectorize& v) {
  std::vector<Node>* owner = nullptr;
  std::size_t pos = 0;
  LoopNode& l = require_loop(p, v.loop, owner, pos);
  if (has_loop_below(l)) throw Error("vectorize target '" + v.loop + "' is not an innermost loop");
  if (l.attrs.parallel || l.attrs.unrolled || l.attrs.vectorized()) {
    throw Error("vectorize target '" + v.loop + "' already carries loop attributes");
  }
  if (v.width < 1 || l.extent % v.width != 0) {
    throw Error("vector width " + std::to_string(v.width) + " does not divide extent " + std::to_string(l.extent) +
                " of loop '" + v.loop + "'");
  }
  if (v.width == l.extent) {
    l.attrs.vector_width = v.width;
    return;
  }
  LoopNode& inner = split(p, v.loop, v.width, "vectorize");
  inner.attrs.vector_width = v.width;
}

void apply_reorder(LoopProgram& p, const Reorder& r) {
  if (r.order.empty()) throw Error("reorder needs at least one loop");
  std::set<std::string> wanted(r.order.begin(), r.order.end());
  if (wanted.size() != r.order.size()) throw Error("reorder lists a loop twice");
  // The outermost listed loop is the first one met in pre-order.
  std::string top;
  for (const auto& ref : preorder_loops(p)) {
    if (wanted.count(ref.loop->var) != 0) {
      top = ref.loop->var;
      break;
    }
  }
  if (top.empty()) throw Error("reorder references unknown loop '" + r.order.front() + "'");
  std::vector<Node>* owner = nullptr;
  std::size_t pos = 0;
  LoopNode* cur = &require_loop(p, top, owner, pos);
  std::vector<LoopNode> band;
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    if (wanted.count(cur->var) == 0) {
      throw Error("reorder loops must form a perfectly nested band; '" + cur->var + "' interrupts it");
    }
    LoopNode header = *cur;
    header.body.clear();
    band.push_back(std::move(header));
    if (k + 1 == r.order.size()) break;
    if (cur->body.size() != 1 || !cur->body.front().is_loop()) {
      throw Error("reorder loops must form a perfectly nested band below '" + cur->var + "'");
    }
    cur = &cur->body.front().loop();
  }
  std::vector<Node> innermost_body = std::move(cur->body);
  // Rebuild from the inside out in the requested order.
  std::vector<Node> body = std::move(innermost_body);
  for (auto it = r.order.rbegin(); it != r.order.rend(); ++it) {
    auto hit = std::find_if(band.begin(), band.end(), [&](const LoopNode& l) { return l.var == *it; });
    if (hit == band.end()) throw Error("reorder references unknown loop '" + *it + "'");
    LoopNode l = *hit;
    l.body = std::move(body);
    body.clear();
    body.emplace_back(std::move(l));
  }
  (*owner)[pos] = std::move(body.front());
}

}  // namespace

LoopProgram apply_transform(const LoopProgram& p, const Transform& t) {
  LoopProgram out = p;
  std::visit(Overloaded{
                 [&](const Tile& x) { apply_tile(out, x); },
                 [&](const Reorder& x) { apply_reorder(out, x); },
                 [&](const Vectorize& x) { apply_vectorize(out, x); },
                 [&](const Unroll& x) {
                   std::vector<Node>* owner = nullptr;
                   std::size_t pos = 0;
                   require_loop(out, x.loop, owner, pos).attrs.unrolled = true;
                 },
                 [&](const Parallel& x) {
                   std::vector<Node>* owner = nullptr;
                   std::size_t pos = 0;
                   require_loop(out, x.loop, owner, pos).attrs.parallel = true;
                 },
             },
             t);
  validate(out);
  return out;
}

LoopProgram apply_schedule(const LoopProgram& p, const Schedule& s) {
  LoopProgram out = p;
  for (const auto& t : s) out = apply_transform(out, t);
  return out;
}

json transform_to_json(const Transform& t) {
  return std::visit(Overloaded{
                        [](const Tile& x) { return json{{"kind", "tile"}, {"loop", x.loop}, {"factor", x.factor}}; },
                        [](const Reorder& x) { return json{{"kind", "reorder"}, {"order", x.order}}; },
                        [](const Unroll& x) { return json{{"kind", "unroll"}, {"loop", x.loop}}; },
                        [](const Vectorize& x) {
                          return json{{"kind", "vectorize"}, {"loop", x.loop}, {"width", x.width}};
                        },
                        [](const Parallel& x) { return json{{"kind", "parallel"}, {"loop", x.loop}}; },
                    },
                    t);
}

Transform transform_from_json(const json& j) {
  const std::string kind = json_util::get_string(j, "kind");
  if (kind == "tile") return Tile{json_util::get_string(j, "loop"), json_util::get_static_int(j, "factor")};
  if (kind == "reorder") {
    if (!j.contains("order") || !j.at("order").is_array()) throw Error("reorder record needs an 'order' list");
    Reorder r;
    for (const auto& v : j.at("order")) {
      if (!v.is_string()) throw Error("reorder 'order' must list loop names");
      r.order.push_back(v.get<std::string>());
    }
    return r;
  }
  if (kind == "unroll") return Unroll{json_util::get_string(j, "loop")};
  if (kind == "vectorize") return Vectorize{json_util::get_string(j, "loop"), json_util::get_static_int(j, "width")};
  if (kind == "parallel") return Parallel{json_util::get_string(j, "loop")};
  throw Error("unknown transform kind '" + kind + "'");
}

json schedule_to_json(const Schedule& s) {
  json out = json::array();
  for (const auto& t : s) out.push_back(transform_to_json(t));
  return out;
}

Schedule schedule_from_json(const json& j) {
  if (!j.is_array()) throw Error("schedule must be a JSON list of transform records");
  Schedule s;
  for (const auto& t : j) s.push_back(transform_from_json(t));
  return s;
}

Schedule parse_schedule(std::string_view text) { return schedule_from_json(json_util::parse_with_position(text)); }

std::vector<Schedule> parse_schedule_list(std::string_view text) {
  json j = json_util::parse_with_position(text);
  if (!j.is_array()) throw Error("schedule list must be a JSON list of schedules");
  std::vector<Schedule> out;
  for (const auto& s : j) out.push_back(schedule_from_json(s));
  return out;
}

std::string schedule_to_string(const Schedule& s) { return schedule_to_json(s).dump(); }

std::size_t SearchSpace::cardinality() const {
  std::size_t n = 1;
  for (const auto& k : knobs) n *= k.alternatives.size();
  return n;
}

Schedule SearchSpace::compose(const std::vector<int>& choice) const {
  if (choice.size() != knobs.size()) throw InternalError("choice vector does not match knob count");
  Schedule s;
  for (std::size_t k = 0; k < knobs.size(); ++k) {
    const auto& alt = knobs[k].alternatives.at(static_cast<std::size_t>(choice[k]));
    s.insert(s.end(), alt.begin(), alt.end());
  }
  return s;
}

namespace {

std::vector<int64_t> int_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw Error(std::string("knob needs a '") + key + "' list");
  std::vector<int64_t> v;
  for (const auto& x : j.at(key)) {
    if (!x.is_number_integer()) throw Error(std::string("knob '") + key + "' entries must be integers");
    v.push_back(x.get<int64_t>());
  }
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) throw Error(std::string("knob '") + key + "' repeats a value");
  return v;
}

std::vector<bool> bool_options(const json& j) {
  std::vector<bool> v;
  if (!j.contains("options")) return {false, true};
  for (const auto& x : j.at("options")) {
    if (!x.is_boolean()) throw Error("knob 'options' entries must be booleans");
    v.push_back(x.get<bool>());
  }
  return v;
}

}  // namespace

SearchSpace parse_space(std::string_view text, const LoopProgram& p) {
  json j = json_util::parse_with_position(text);
  if (!j.is_object() || !j.contains("knobs") || !j.at("knobs").is_array()) {
    throw Error("space description needs a 'knobs' list");
  }
  SearchSpace space;
  for (const auto& kj : j.at("knobs")) {
    if (!kj.is_object()) throw Error("each knob must be an object");
    Knob knob;
    if (kj.contains("tile")) {
      const json& t = kj.at("tile");
      const std::string loop = json_util::get_string(t, "loop");
      knob.name = "tile:" + loop;
      const LoopNode* l = find_loop(p, loop);
      for (int64_t f : int_list(t, "factors")) {
        if (l != nullptr && (f < 1 || l->extent % f != 0)) {
          throw Error("tile factor " + std::to_string(f) + " rejected for loop '" + loop + "' (extent " +
                      std::to_string(l->extent) + "): factors must divide the extent");
        }
        knob.alternatives.push_back({Tile{loop, f}});
      }
    } else if (kj.contains("reorder")) {
      const json& r = kj.at("reorder");
      knob.name = "reorder";
      if (!r.contains("orders") || !r.at("orders").is_array()) throw Error("reorder knob needs 'orders'");
      for (const auto& o : r.at("orders")) {
        Reorder ro;
        for (const auto& v : o) ro.order.push_back(v.get<std::string>());
        knob.alternatives.push_back({ro});
      }
    } else if (kj.contains("vectorize")) {
      const json& v = kj.at("vectorize");
      const std::string loop = json_util::get_string(v, "loop");
      knob.name = "vectorize:" + loop;
      for (int64_t w : int_list(v, "widths")) {
        if (w < 0) throw Error("vector widths must be non-negative");
        if (w == 0) {
          knob.alternatives.push_back({});
        } else {
          knob.alternatives.push_back({Vectorize{loop, w}});
        }
      }
    } else if (kj.contains("unroll")) {
      const std::string loop = json_util::get_string(kj.at("unroll"), "loop");
      knob.name = "unroll:" + loop;
      for (bool on : bool_options(kj.at("unroll"))) {
        knob.alternatives.push_back(on ? std::vector<Transform>{Unroll{loop}} : std::vector<Transform>{});
      }
    } else if (kj.contains("parallel")) {
      const std::string loop = json_util::get_string(kj.at("parallel"), "loop");
      knob.name = "parallel:" + loop;
      for (bool on : bool_options(kj.at("parallel"))) {
        knob.alternatives.push_back(on ? std::vector<Transform>{Parallel{loop}} : std::vector<Transform>{});
      }
    } else {
      throw Error("unknown knob; expected tile, reorder, vectorize, unroll or parallel");
    }
    if (kj.contains("name") && kj.at("name").is_string()) knob.name = kj.at("name").get<std::string>();
    if (knob.alternatives.empty()) throw Error("knob '" + knob.name + "' has no alternatives: empty space");
    space.knobs.push_back(std::move(knob));
  }
  return space;
}

std::vector<Schedule> enumerate_space(const LoopProgram& p, const SearchSpace& space) {
  std::vector<Schedule> out;
  std::set<std::string> seen;
  const std::size_t n = space.cardinality();
  std::vector<int> choice(space.knobs.size(), 0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    // Mixed-radix decode, last knob fastest.
    std::size_t rest = idx;
    for (std::size_t k = space.knobs.size(); k-- > 0;) {
      const std::size_t m = space.knobs[k].alternatives.size();
      choice[k] = static_cast<int>(rest % m);
      rest /= m;
    }
    Schedule s = space.compose(choice);
    try {
      (void)apply_schedule(p, s);
    } catch (const Error&) {
      continue;
    }
    if (seen.insert(schedule_to_string(s)).second) out.push_back(std::move(s));
  }
  if (out.empty()) throw Error("schedule space is empty: no combination applies to the program");
  return out;
}

}  // namespace loopcost
