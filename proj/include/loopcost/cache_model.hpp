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
#include <string>
#include <vector>

#include "loopcost/features.hpp"
#include "loopcost/loop_ir.hpp"

namespace loopcost {

/// Cache capacity in elements.
struct CacheSpec {
  int64_t capacity = 0;

  /// Throws Error unless both values are positive.
  static CacheSpec from_bytes(int64_t l1_capacity_bytes, int64_t element_bytes);
};

/// Iteration ranges of the loop variables that vary inside a subtree.
struct VarRange {
  int64_t extent = 1;
  int64_t step = 1;
};
using VarRanges = std::map<std::string, VarRange, std::less<>>;

/// Exact set of values taken by one index expression, as a bitmap over [lo, lo + bits.size()).
struct DimSet {
  int64_t lo = 0;
  std::vector<bool> bits;

  int64_t count() const;
  friend bool operator==(const DimSet&, const DimSet&) = default;
};

/// Per-dimension value sets of one access; the space is their product.
struct Box {
  std::vector<DimSet> dims;
  bool exact = true;  // false when a varying loop variable feeds several dimensions

  int64_t cardinality() const;
  friend bool operator==(const Box& a, const Box& b) { return a.dims == b.dims; }
};

struct TensorSpace {
  std::string tensor;
  std::vector<Box> boxes;  // distinct boxes
  int64_t cardinality = 0;
  bool exact = true;
};

/// Elements touched by a set of accesses when the variables in `ranges` vary
/// and every other variable is held at zero.
struct DataSpace {
  std::vector<TensorSpace> tensors;  // program declaration order

  int64_t cardinality() const;        // sum over tensors
  bool exact() const;
  const TensorSpace* find(const std::string& tensor) const;
};

Box access_box(const AccessNode& a, const VarRanges& ranges);
/// Exact cardinality of a union of boxes (inclusion-exclusion over the distinct boxes).
int64_t union_cardinality(const std::vector<Box>& boxes, bool* exact = nullptr);
DataSpace data_space(const LoopProgram& p, const std::vector<const AccessNode*>& accesses, const VarRanges& ranges);

struct TensorCost {
  std::string tensor;
  int64_t dfp = 0;
  int64_t dmov = 0;
  bool reuse = true;
};

struct NodeCost {
  int64_t dfp = 0;
  int64_t dmov = 0;
  int64_t iteration_dfp = 0;  // single-iteration footprint (union of the children)
  bool exact = true;
  std::vector<TensorCost> tensors;

  const TensorCost* find(const std::string& tensor) const;
};

/// Reuse status of a tensor after moving up to a loop. Starts from the AND of
/// the children; it is lost when the tensor's footprint over the loop exceeds
/// the cache, or when the loop does not index the tensor and one iteration
/// touches more data than the cache holds (the tensor's reuse distance then
/// spans that iteration).
bool update_reuse(bool child_reuse, int64_t tensor_dfp, bool loop_indexes_tensor, int64_t iteration_dfp,
                  const CacheSpec& cache);

/// Bottom-up data footprint and movement of one node.
NodeCost visit_node(const LoopProgram& p, const Node& node, const CacheSpec& cache);

struct LoopCostReport {
  std::string var;
  int depth = 0;
  NodeCost cost;
};

struct CacheReport {
  NodeCost root;                     // the program body as a single-trip loop
  std::vector<LoopCostReport> loops;  // pre-order
  std::vector<std::string> diagnostics;
};

CacheReport analyze_cache(const LoopProgram& p, const CacheSpec& cache);

/// est_l1_movement (elements) and est_l1_movement_bytes.
FeatureContribution cache_feature(const LoopProgram& p, const CacheSpec& cache);

}  // namespace loopcost
