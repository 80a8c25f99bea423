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

#include "loopcost/cache_model.hpp"

#include <algorithm>
#include <functional>

#include "loopcost/error.hpp"

namespace loopcost {

CacheSpec CacheSpec::from_bytes(int64_t l1_capacity_bytes, int64_t element_bytes) {
  if (l1_capacity_bytes <= 0 || element_bytes <= 0) throw Error("cache capacity and element size must be positive");
  CacheSpec c;
  c.capacity = l1_capacity_bytes / element_bytes;
  if (c.capacity <= 0) throw Error("cache holds no element of the configured size");
  return c;
}

int64_t DimSet::count() const { return std::count(bits.begin(), bits.end(), true); }

int64_t Box::cardinality() const {
  int64_t n = 1;
  for (const auto& d : dims) n *= d.count();
  return n;
}

namespace {

constexpr int64_t kMaxSpan = int64_t{1} << 26;
constexpr std::size_t kMaxExactBoxes = 12;

DimSet dim_values(const AffineExpr& e, const VarRanges& ranges) {
  int64_t lo = e.constant();
  int64_t hi = e.constant();
  std::vector<std::pair<int64_t, int64_t>> moves;  // (increment, extent)
  for (const auto& [name, c] : e.terms()) {
    auto it = ranges.find(name);
    if (it == ranges.end()) continue;  // held at zero
    const int64_t inc = c * it->second.step;
    const int64_t span = inc * (it->second.extent - 1);
    (span < 0 ? lo : hi) += span;
    if (it->second.extent > 1) moves.emplace_back(inc, it->second.extent);
  }
  if (hi - lo + 1 > kMaxSpan) throw Error("index range too large for the footprint model: " + e.to_string());
  DimSet s;
  s.lo = lo;
  s.bits.assign(static_cast<std::size_t>(hi - lo + 1), false);
  int64_t start = e.constant();
  for (const auto& [inc, ext] : moves) {
    if (inc < 0) start += inc * (ext - 1);
  }
  s.bits[static_cast<std::size_t>(start - lo)] = true;
  int64_t reach = start;  // highest value that can be set so far
  for (const auto& [inc, ext] : moves) {
    const int64_t a = inc < 0 ? -inc : inc;
    std::vector<bool> next = s.bits;
    for (int64_t k = 1; k < ext; ++k) {
      const int64_t shift = a * k;
      for (int64_t v = reach; v >= s.lo; --v) {
        if (s.bits[static_cast<std::size_t>(v - s.lo)]) next[static_cast<std::size_t>(v + shift - s.lo)] = true;
      }
    }
    reach += a * (ext - 1);
    s.bits = std::move(next);
  }
  return s;
}

DimSet intersect(const DimSet& a, const DimSet& b) {
  const int64_t lo = std::max(a.lo, b.lo);
  const int64_t hi = std::min(a.lo + static_cast<int64_t>(a.bits.size()), b.lo + static_cast<int64_t>(b.bits.size()));
  DimSet out;
  out.lo = lo;
  if (hi <= lo) return out;
  out.bits.resize(static_cast<std::size_t>(hi - lo));
  for (int64_t v = lo; v < hi; ++v) {
    out.bits[static_cast<std::size_t>(v - lo)] =
        a.bits[static_cast<std::size_t>(v - a.lo)] && b.bits[static_cast<std::size_t>(v - b.lo)];
  }
  return out;
}

DimSet unite(const DimSet& a, const DimSet& b) {
  const int64_t lo = std::min(a.lo, b.lo);
  const int64_t hi = std::max(a.lo + static_cast<int64_t>(a.bits.size()), b.lo + static_cast<int64_t>(b.bits.size()));
  DimSet out;
  out.lo = lo;
  out.bits.assign(static_cast<std::size_t>(hi - lo), false);
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i]) out.bits[static_cast<std::size_t>(a.lo - lo) + i] = true;
  }
  for (std::size_t i = 0; i < b.bits.size(); ++i) {
    if (b.bits[i]) out.bits[static_cast<std::size_t>(b.lo - lo) + i] = true;
  }
  return out;
}

Box intersect(const Box& a, const Box& b) {
  Box out;
  for (std::size_t d = 0; d < a.dims.size(); ++d) out.dims.push_back(intersect(a.dims[d], b.dims[d]));
  return out;
}

}  // namespace

Box access_box(const AccessNode& a, const VarRanges& ranges) {
  Box b;
  std::map<std::string, int> dims_using;
  for (const auto& e : a.index) {
    b.dims.push_back(dim_values(e, ranges));
    for (const auto& [name, c] : e.terms()) {
      auto it = ranges.find(name);
      if (it != ranges.end() && it->second.extent > 1) ++dims_using[name];
    }
  }
  b.exact = std::all_of(dims_using.begin(), dims_using.end(), [](const auto& kv) { return kv.second <= 1; });
  return b;
}

int64_t union_cardinality(const std::vector<Box>& input, bool* exact) {
  std::vector<Box> boxes;
  bool all_exact = true;
  for (const auto& b : input) {
    all_exact = all_exact && b.exact;
    if (std::find(boxes.begin(), boxes.end(), b) == boxes.end()) boxes.push_back(b);
  }
  if (boxes.empty()) {
    if (exact != nullptr) *exact = true;
    return 0;
  }
  if (boxes.size() > kMaxExactBoxes) {
    // Bounding union per dimension: an over-approximation.
    Box hull = boxes.front();
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      for (std::size_t d = 0; d < hull.dims.size(); ++d) hull.dims[d] = unite(hull.dims[d], boxes[i].dims[d]);
    }
    if (exact != nullptr) *exact = false;
    return hull.cardinality();
  }
  int64_t total = 0;
  const std::size_t n = boxes.size();
  // Depth-first inclusion-exclusion; empty intersections prune their supersets.
  std::function<void(std::size_t, const Box&, int)> rec = [&](std::size_t next, const Box& acc, int size) {
    for (std::size_t i = next; i < n; ++i) {
      Box b = size == 0 ? boxes[i] : intersect(acc, boxes[i]);
      const int64_t c = b.cardinality();
      if (c == 0) continue;
      total += (size % 2 == 0) ? c : -c;
      rec(i + 1, b, size + 1);
    }
  };
  rec(0, Box{}, 0);
  if (exact != nullptr) *exact = all_exact;
  return total;
}

int64_t DataSpace::cardinality() const {
  int64_t n = 0;
  for (const auto& t : tensors) n += t.cardinality;
  return n;
}

bool DataSpace::exact() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const TensorSpace& t) { return t.exact; });
}

const TensorSpace* DataSpace::find(const std::string& tensor) const {
  for (const auto& t : tensors) {
    if (t.tensor == tensor) return &t;
  }
  return nullptr;
}

DataSpace data_space(const LoopProgram& p, const std::vector<const AccessNode*>& accesses, const VarRanges& ranges) {
  DataSpace ds;
  for (const auto& decl : p.tensors) {
    TensorSpace ts;
    ts.tensor = decl.name;
    std::vector<Box> boxes;
    for (const AccessNode* a : accesses) {
      if (a->tensor == decl.name) boxes.push_back(access_box(*a, ranges));
    }
    if (boxes.empty()) continue;
    ts.cardinality = union_cardinality(boxes, &ts.exact);
    for (auto& b : boxes) {
      if (std::find(ts.boxes.begin(), ts.boxes.end(), b) == ts.boxes.end()) ts.boxes.push_back(std::move(b));
    }
    ds.tensors.push_back(std::move(ts));
  }
  return ds;
}

const TensorCost* NodeCost::find(const std::string& tensor) const {
  for (const auto& t : tensors) {
    if (t.tensor == tensor) return &t;
  }
  return nullptr;
}

bool update_reuse(bool child_reuse, int64_t tensor_dfp, bool loop_indexes_tensor, int64_t iteration_dfp,
                  const CacheSpec& cache) {
  if (!child_reuse) return false;
  if (tensor_dfp > cache.capacity) return false;
  if (!loop_indexes_tensor && iteration_dfp > cache.capacity) return false;
  return true;
}

namespace {

class Analyzer {
 public:
  Analyzer(const LoopProgram& p, const CacheSpec& cache, CacheReport* report)
      : p_(p), cache_(cache), report_(report) {
    if (cache.capacity <= 0) throw Error("cache capacity must be positive");
  }

  struct Subtree {
    std::vector<const AccessNode*> accesses;
    VarRanges ranges;
  };

  NodeCost visit(const Node& n, int depth, Subtree& sub) {
    if (!n.is_loop()) {
      const AccessNode& a = n.access();
      sub.accesses.push_back(&a);
      NodeCost leaf;
      leaf.dfp = 1;
      leaf.dmov = 1;
      leaf.iteration_dfp = 1;
      leaf.tensors.push_back({a.tensor, 1, 1, true});
      return leaf;
    }
    const LoopNode& l = n.loop();
    std::size_t slot = 0;
    if (report_ != nullptr) {
      slot = report_->loops.size();
      report_->loops.push_back({l.var, depth, {}});
    }
    Subtree mine;
    std::vector<NodeCost> children;
    for (const auto& c : l.body) children.push_back(visit(c, depth + 1, mine));
    NodeCost cost = combine(l.var, l.extent, l.step, children, mine);
    if (report_ != nullptr) report_->loops[slot].cost = cost;
    sub.accesses.insert(sub.accesses.end(), mine.accesses.begin(), mine.accesses.end());
    sub.ranges.insert(mine.ranges.begin(), mine.ranges.end());
    sub.ranges[l.var] = {l.extent, l.step};
    return cost;
  }

  NodeCost root(const std::vector<Node>& body) {
    Subtree all;
    std::vector<NodeCost> children;
    for (const auto& c : body) children.push_back(visit(c, 0, all));
    return combine("", 1, 1, children, all);
  }

 private:
  // `var` empty: the synthetic single-trip root.
  NodeCost combine(const std::string& var, int64_t trip, int64_t step, const std::vector<NodeCost>& children,
                   const Subtree& sub) {
    NodeCost cost;
    const DataSpace iteration = data_space(p_, sub.accesses, sub.ranges);
    VarRanges full = sub.ranges;
    if (!var.empty()) full[var] = {trip, step};
    const DataSpace whole = data_space(p_, sub.accesses, full);
    cost.iteration_dfp = iteration.cardinality();
    cost.dfp = whole.cardinality();
    cost.exact = whole.exact();
    if (!cost.exact && report_ != nullptr) {
      report_->diagnostics.push_back("footprint of loop '" + (var.empty() ? std::string("<root>") : var) +
                                     "' is a box over-approximation (skewed access)");
    }
    const bool fits = cost.iteration_dfp <= cache_.capacity;
    for (const auto& ts : whole.tensors) {
      TensorCost tc;
      tc.tensor = ts.tensor;
      tc.dfp = ts.cardinality;
      bool child_reuse = true;
      int64_t child_dmov = 0;
      for (const auto& c : children) {
        if (const TensorCost* ct = c.find(ts.tensor)) {
          child_reuse = child_reuse && ct->reuse;
          child_dmov += ct->dmov;
        }
      }
      bool indexes = var.empty();
      for (const AccessNode* a : sub.accesses) {
        if (a->tensor != ts.tensor || var.empty()) continue;
        for (const auto& e : a->index) indexes = indexes || e.uses(var);
      }
      tc.reuse = update_reuse(child_reuse, tc.dfp, indexes, cost.iteration_dfp, cache_);
      if (fits || tc.reuse) {
        tc.dmov = tc.dfp;
      } else {
        tc.dmov = child_dmov * trip;
      }
      cost.dmov += tc.dmov;
      cost.tensors.push_back(tc);
    }
    if (fits) cost.dmov = cost.dfp;
    return cost;
  }

  const LoopProgram& p_;
  CacheSpec cache_;
  CacheReport* report_;
};

}  // namespace

NodeCost visit_node(const LoopProgram& p, const Node& node, const CacheSpec& cache) {
  Analyzer a(p, cache, nullptr);
  Analyzer::Subtree sub;
  return a.visit(node, 0, sub);
}

CacheReport analyze_cache(const LoopProgram& p, const CacheSpec& cache) {
  CacheReport r;
  Analyzer a(p, cache, &r);
  r.root = a.root(p.body);
  return r;
}

FeatureContribution cache_feature(const LoopProgram& p, const CacheSpec& cache) {
  CacheReport r = analyze_cache(p, cache);
  FeatureContribution fc;
  fc.set("est_l1_movement", static_cast<double>(r.root.dmov));
  double bytes = 0;
  for (const auto& t : r.root.tensors) bytes += static_cast<double>(t.dmov) * p.tensor(t.tensor).elem_bytes;
  fc.set("est_l1_movement_bytes", bytes);
  fc.diagnostics = std::move(r.diagnostics);
  return fc;
}

}  // namespace loopcost
