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

#include "oracles.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "loopcost/asm_analysis.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/schedule.hpp"

namespace loopcost::oracle {

namespace {

using Env = std::map<std::string, int64_t, std::less<>>;

struct Layout {
  std::map<std::string, int64_t, std::less<>> offset;
  int64_t total = 0;
};

Layout layout_of(const LoopProgram& p) {
  Layout l;
  for (const auto& t : p.tensors) {
    l.offset[t.name] = l.total;
    l.total += t.num_elements();
  }
  return l;
}

int64_t element_id(const LoopProgram& p, const Layout& layout, const AccessNode& a, const Env& env) {
  const TensorDecl& t = p.tensor(a.tensor);
  int64_t flat = 0;
  for (int d = 0; d < t.rank(); ++d) {
    const int64_t v = a.index[static_cast<std::size_t>(d)].eval([&](std::string_view name) {
      auto it = env.find(name);
      return it == env.end() ? int64_t{0} : it->second;
    });
    if (v < 0 || v >= t.dims[static_cast<std::size_t>(d)]) throw std::logic_error("oracle: access out of bounds");
    flat = flat * t.dims[static_cast<std::size_t>(d)] + v;
  }
  return layout.offset.at(a.tensor) + flat;
}

void walk(const LoopProgram& p, const Layout& layout, const std::vector<Node>& body, Env& env,
          const std::function<void(int64_t, AccessKind)>& fn) {
  for (const auto& n : body) {
    if (n.is_loop()) {
      const LoopNode& l = n.loop();
      for (int64_t k = 0; k < l.extent; ++k) {
        env[l.var] = k * l.step;
        walk(p, layout, l.body, env, fn);
      }
      env.erase(l.var);
    } else {
      fn(element_id(p, layout, n.access(), env), n.access().kind);
    }
  }
}

int64_t count_distinct(const Layout& layout, const std::function<void(const std::function<void(int64_t, AccessKind)>&)>& run) {
  std::vector<bool> seen(static_cast<std::size_t>(layout.total), false);
  int64_t count = 0;
  run([&](int64_t e, AccessKind) {
    if (!seen[static_cast<std::size_t>(e)]) {
      seen[static_cast<std::size_t>(e)] = true;
      ++count;
    }
  });
  return count;
}

double lowering_factor(const LoopNode& l, Target t) {
  if (l.attrs.vectorized()) return t == Target::kPtx ? static_cast<double>(l.extent) : 1.0;
  if (l.attrs.unrolled) return static_cast<double>(l.extent);
  if (t == Target::kPtx && l.attrs.parallel) return 1.0;
  return static_cast<double>(l.extent);
}

void count_body(const LoopProgram& p, const std::vector<Node>& body, double weight, Target t, IrCounts& c) {
  int loads = 0;
  auto close = [&] {
    if (loads >= 2) c.n_fma += weight;
    loads = 0;
  };
  for (const auto& n : body) {
    if (n.is_loop()) {
      if (loads > 0) close();
      count_body(p, n.loop().body, weight * lowering_factor(n.loop(), t), t, c);
      continue;
    }
    const AccessNode& a = n.access();
    if (p.tensor(a.tensor).scope == MemoryScope::kShared) c.n_shared += weight;
    if (a.kind == AccessKind::kLoad) {
      c.n_load += weight;
      ++loads;
    } else {
      c.n_store += weight;
      close();
    }
  }
  if (loads > 0) close();
}

// --- generator -------------------------------------------------------------

class Gen {
 public:
  explicit Gen(uint64_t seed) : rng_(seed) {}
  int64_t pick(std::initializer_list<int64_t> v) { return *(v.begin() + static_cast<std::ptrdiff_t>(rng_() % v.size())); }
  uint64_t below(uint64_t n) { return rng_() % n; }

 private:
  std::mt19937_64 rng_;
};

LoopNode loop(std::string var, int64_t extent, std::vector<Node> body) {
  LoopNode l;
  l.var = std::move(var);
  l.extent = extent;
  l.body = std::move(body);
  return l;
}

AccessNode access(std::string tensor, AccessKind kind, std::vector<std::string> idx) {
  AccessNode a;
  a.tensor = std::move(tensor);
  a.kind = kind;
  for (const auto& e : idx) a.index.push_back(AffineExpr::Parse(e));
  return a;
}

TensorDecl tensor(std::string name, std::vector<int64_t> dims) {
  TensorDecl t;
  t.name = std::move(name);
  t.dims = std::move(dims);
  return t;
}

/// Nests `vars` (outermost first) around `inner`.
std::vector<Node> nest(const std::vector<std::pair<std::string, int64_t>>& vars, std::vector<Node> inner) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
    std::vector<Node> wrapped;
    wrapped.emplace_back(loop(it->first, it->second, std::move(inner)));
    inner = std::move(wrapped);
  }
  return inner;
}

std::vector<std::pair<std::string, int64_t>> permuted(Gen& g, std::vector<std::pair<std::string, int64_t>> v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[g.below(i)]);
  return v;
}

LoopProgram make_matmul(Gen& g) {
  const int64_t I = g.pick({4, 8, 16, 32}), J = g.pick({4, 8, 16, 32}), K = g.pick({4, 8, 16, 32});
  LoopProgram p;
  p.tensors = {tensor("A", {I, K}), tensor("B", {K, J}), tensor("C", {I, J})};
  std::vector<Node> stmt = {access("C", AccessKind::kLoad, {"i", "j"}), access("A", AccessKind::kLoad, {"i", "k"}),
                            access("B", AccessKind::kLoad, {"k", "j"}), access("C", AccessKind::kStore, {"i", "j"})};
  p.body = nest(permuted(g, {{"i", I}, {"j", J}, {"k", K}}), std::move(stmt));
  if (g.below(2) == 0 && I >= 8) p = apply_schedule(p, {Tile{"i", I / 4}});
  return p;
}

LoopProgram make_transpose(Gen& g) {
  const int64_t I = g.pick({8, 16, 32, 64}), J = g.pick({8, 16, 32, 64});
  LoopProgram p;
  p.tensors = {tensor("A", {I, J}), tensor("B", {J, I})};
  std::vector<Node> stmt = {access("A", AccessKind::kLoad, {"i", "j"}), access("B", AccessKind::kStore, {"j", "i"})};
  p.body = nest(permuted(g, {{"i", I}, {"j", J}}), std::move(stmt));
  if (g.below(2) == 0) p = apply_schedule(p, {Tile{"j", J / 4}});
  return p;
}

LoopProgram make_stencil(Gen& g) {
  const int64_t I = g.pick({8, 16, 32, 64}), J = g.pick({8, 16, 32});
  LoopProgram p;
  p.tensors = {tensor("A", {I + 1, J + 1}), tensor("B", {I, J})};
  std::vector<Node> stmt = {access("A", AccessKind::kLoad, {"i", "j"}), access("A", AccessKind::kLoad, {"i + 1", "j"}),
                            access("A", AccessKind::kLoad, {"i", "j + 1"}), access("B", AccessKind::kStore, {"i", "j"})};
  p.body = nest(permuted(g, {{"i", I}, {"j", J}}), std::move(stmt));
  return p;
}

LoopProgram make_siblings(Gen& g) {
  const int64_t I = g.pick({8, 16, 32}), K = g.pick({8, 16, 32, 64});
  LoopProgram p;
  p.tensors = {tensor("A", {I, K}), tensor("B", {K, I}), tensor("s", {I}), tensor("t", {I})};
  std::vector<Node> first = nest({{"k", K}}, {access("s", AccessKind::kLoad, {"i"}), access("A", AccessKind::kLoad, {"i", "k"}),
                                              access("s", AccessKind::kStore, {"i"})});
  std::vector<Node> second = nest({{"k2", K}}, {access("t", AccessKind::kLoad, {"i"}), access("B", AccessKind::kLoad, {"k2", "i"}),
                                                access("t", AccessKind::kStore, {"i"})});
  std::vector<Node> body = std::move(first);
  for (auto& n : second) body.push_back(std::move(n));
  p.body = nest({{"i", I}}, std::move(body));
  return p;
}

LoopProgram make_conv(Gen& g) {
  const int64_t N = g.pick({16, 32, 64, 128}), K = g.pick({3, 5, 8});
  LoopProgram p;
  p.tensors = {tensor("in", {N + K - 1}), tensor("w", {K}), tensor("out", {N})};
  std::vector<Node> stmt = {access("out", AccessKind::kLoad, {"i"}), access("in", AccessKind::kLoad, {"i + k"}),
                            access("w", AccessKind::kLoad, {"k"}), access("out", AccessKind::kStore, {"i"})};
  p.body = nest(permuted(g, {{"i", N}, {"k", K}}), std::move(stmt));
  return p;
}

LoopProgram make_fused(Gen& g) {
  // Two producer/consumer nests under a shared tile loop, in the style of a fused pair of products.
  const int64_t T = g.pick({4, 8}), N = g.pick({8, 16, 32});
  const int64_t J = g.pick({8, 16});
  LoopProgram p;
  p.tensors = {tensor("A", {N, J}), tensor("B", {J, J}), tensor("C", {N, J}), tensor("D", {J, J}),
               tensor("E", {N, J})};
  std::vector<Node> mm1 =
      nest({{"k", J}, {"i1", T}, {"j1", J}},
           {access("C", AccessKind::kLoad, {"i1 + it", "j1"}), access("A", AccessKind::kLoad, {"i1 + it", "k"}),
            access("B", AccessKind::kLoad, {"k", "j1"}), access("C", AccessKind::kStore, {"i1 + it", "j1"})});
  std::vector<Node> mm2 =
      nest({{"l", J}, {"i2", T}, {"j2", J}},
           {access("E", AccessKind::kLoad, {"i2 + it", "l"}), access("C", AccessKind::kLoad, {"i2 + it", "j2"}),
            access("D", AccessKind::kLoad, {"j2", "l"}), access("E", AccessKind::kStore, {"i2 + it", "l"})});
  for (auto& n : mm2) mm1.push_back(std::move(n));
  LoopNode outer = loop("it", N / T, std::move(mm1));
  outer.step = T;
  p.body.emplace_back(std::move(outer));
  return p;
}

void count_iterations(const std::vector<Node>& body, int64_t weight, int64_t& total) {
  bool leaf = false;
  for (const auto& n : body) {
    if (n.is_loop()) {
      count_iterations(n.loop().body, weight * n.loop().extent, total);
    } else {
      leaf = true;
    }
  }
  if (leaf) total += weight;
}

}  // namespace

int64_t total_elements(const LoopProgram& p) { return layout_of(p).total; }

void walk_trace(const LoopProgram& p, const std::function<void(int64_t, AccessKind)>& fn) {
  const Layout layout = layout_of(p);
  Env env;
  walk(p, layout, p.body, env, fn);
}

int64_t distinct_elements(const LoopProgram& p) {
  const Layout layout = layout_of(p);
  return count_distinct(layout, [&](const auto& fn) {
    Env env;
    walk(p, layout, p.body, env, fn);
  });
}

int64_t distinct_elements(const LoopProgram& p, const LoopNode& subtree) {
  const Layout layout = layout_of(p);
  return count_distinct(layout, [&](const auto& fn) {
    Env env;
    std::vector<Node> one;
    one.emplace_back(subtree);
    walk(p, layout, one, env, fn);
  });
}

int64_t lru_misses(const LoopProgram& p, int64_t capacity) {
  const Layout layout = layout_of(p);
  const std::size_t n = static_cast<std::size_t>(layout.total);
  // Intrusive doubly linked list over element ids; head is most recent.
  constexpr int64_t kNone = -1;
  std::vector<int64_t> prev(n, kNone), next(n, kNone);
  std::vector<bool> resident(n, false);
  int64_t head = kNone, tail = kNone, size = 0, misses = 0;
  auto unlink = [&](int64_t e) {
    const auto u = static_cast<std::size_t>(e);
    if (prev[u] != kNone) next[static_cast<std::size_t>(prev[u])] = next[u]; else head = next[u];
    if (next[u] != kNone) prev[static_cast<std::size_t>(next[u])] = prev[u]; else tail = prev[u];
    prev[u] = next[u] = kNone;
  };
  auto push_front = [&](int64_t e) {
    const auto u = static_cast<std::size_t>(e);
    next[u] = head;
    prev[u] = kNone;
    if (head != kNone) prev[static_cast<std::size_t>(head)] = e;
    head = e;
    if (tail == kNone) tail = e;
  };
  Env env;
  walk(p, layout, p.body, env, [&](int64_t e, AccessKind) {
    const auto u = static_cast<std::size_t>(e);
    if (resident[u]) {
      unlink(e);
      push_front(e);
      return;
    }
    ++misses;
    if (size == capacity) {
      const int64_t victim = tail;
      unlink(victim);
      resident[static_cast<std::size_t>(victim)] = false;
      --size;
    }
    push_front(e);
    resident[u] = true;
    ++size;
  });
  return misses;
}

IrCounts ir_walk_counts(const LoopProgram& p, Target t) {
  IrCounts c;
  count_body(p, p.body, 1.0, t, c);
  return c;
}

int64_t exhaustive_cycles(const DepGraph& g, const SchedSpec& spec) {
  const std::size_t n = g.size();
  if (n == 0) return 0;
  struct Pred {
    std::size_t from;
    bool raw;
  };
  std::vector<std::vector<Pred>> preds(n);
  for (const auto& e : g.true_edges) preds[static_cast<std::size_t>(e.to)].push_back({static_cast<std::size_t>(e.from), true});
  for (const auto& e : g.false_edges) preds[static_cast<std::size_t>(e.to)].push_back({static_cast<std::size_t>(e.from), false});
  std::vector<int64_t> lat(n);
  for (std::size_t i = 0; i < n; ++i) lat[i] = spec.latency_of(g.nodes[i]);

  std::vector<int64_t> issue(n, -1);
  std::map<int64_t, int> width_used;
  std::map<std::pair<int64_t, std::string>, int> unit_used;
  int64_t best = std::numeric_limits<int64_t>::max();

  std::function<void(std::size_t, int64_t)> dfs = [&](std::size_t placed, int64_t finish) {
    if (finish >= best) return;
    if (placed == n) {
      best = finish;
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (issue[i] >= 0) continue;
      int64_t earliest = 0;
      bool ready = true;
      for (const auto& pr : preds[i]) {
        if (issue[pr.from] < 0) {
          ready = false;
          break;
        }
        earliest = std::max(earliest, issue[pr.from] + (pr.raw ? lat[pr.from] : 1));
      }
      if (!ready) continue;
      const int limit = spec.units_of(g.nodes[i]);
      const std::string& cls = g.nodes[i].latency_class;
      int64_t c = earliest;
      while (width_used[c] >= spec.issue_width || (limit > 0 && unit_used[{c, cls}] >= limit)) ++c;
      issue[i] = c;
      ++width_used[c];
      ++unit_used[{c, cls}];
      dfs(placed + 1, std::max(finish, c + lat[i]));
      --unit_used[{c, cls}];
      --width_used[c];
      issue[i] = -1;
    }
  };
  dfs(0, 0);
  return best;
}

int64_t iteration_count(const LoopProgram& p) {
  int64_t total = 0;
  count_iterations(p.body, 1, total);
  return total;
}

std::vector<GeneratedNest> generated_nests(int count, uint64_t seed) {
  Gen g(seed);
  std::vector<GeneratedNest> out;
  const char* kinds[] = {"matmul", "transpose", "stencil", "siblings", "conv", "fused"};
  for (int i = 0; static_cast<int>(out.size()) < count; ++i) {
    const std::size_t kind = static_cast<std::size_t>(i) % 6;
    LoopProgram p;
    switch (kind) {
      case 0: p = make_matmul(g); break;
      case 1: p = make_transpose(g); break;
      case 2: p = make_stencil(g); break;
      case 3: p = make_siblings(g); break;
      case 4: p = make_conv(g); break;
      default: p = make_fused(g); break;
    }
    validate(p);
    if (iteration_count(p) > (int64_t{1} << 16)) continue;
    const int64_t fp = distinct_elements(p);
    const int64_t divisor = g.pick({1, 2, 4, 8, 16});
    GeneratedNest nest;
    nest.name = std::string(kinds[kind]) + "_" + std::to_string(out.size());
    nest.capacity = std::max<int64_t>(8, divisor == 1 ? 2 * fp : fp / divisor);
    nest.program = std::move(p);
    out.push_back(std::move(nest));
  }
  return out;
}

TruthLatency truth_latency(const LoopProgram& p, const ArchSpec& arch, double miss_penalty) {
  TruthLatency t;
  t.misses = lru_misses(p, arch.cache().capacity);
  const Cfg cfg = parse_asm(emit_mock_code(p, arch.target), dialect_for(arch.target));
  const LoopMapResult lm = loop_map(p, cfg);
  t.ilp_cycles = ilp_feature(cfg, lm.matches, arch.ilp).get("ilp_cycles");
  t.latency = miss_penalty * static_cast<double>(t.misses) + t.ilp_cycles;
  return t;
}

}  // namespace loopcost::oracle
