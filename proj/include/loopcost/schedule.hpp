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
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "loopcost/loop_ir.hpp"

namespace loopcost {

struct Tile {
  std::string loop;
  int64_t factor = 1;
  friend bool operator==(const Tile&, const Tile&) = default;
};
struct Reorder {
  std::vector<std::string> order;  // new order, outermost first
  friend bool operator==(const Reorder&, const Reorder&) = default;
};
struct Unroll {
  std::string loop;
  friend bool operator==(const Unroll&, const Unroll&) = default;
};
struct Vectorize {
  std::string loop;
  int64_t width = 1;
  friend bool operator==(const Vectorize&, const Vectorize&) = default;
};
struct Parallel {
  std::string loop;
  friend bool operator==(const Parallel&, const Parallel&) = default;
};

using Transform = std::variant<Tile, Reorder, Unroll, Vectorize, Parallel>;
using Schedule = std::vector<Transform>;

/// Names of the two loops produced by splitting `var`.
std::string outer_name(std::string_view var);
std::string inner_name(std::string_view var);

/// Applies the transforms in order. Tiling `v` (extent N, step s) by T gives
/// `v_o` (extent N/T, step s*T) and `v_i` (extent T, step s); accesses are
/// rewritten with v = v_o + v_i. Throws Error for invalid targets, non-dividing
/// factors and attribute conflicts.
LoopProgram apply_schedule(const LoopProgram& p, const Schedule& s);
LoopProgram apply_transform(const LoopProgram& p, const Transform& t);

nlohmann::json transform_to_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);
Schedule parse_schedule(std::string_view text);
/// A JSON list of schedules (each a list of transform records).
std::vector<Schedule> parse_schedule_list(std::string_view text);
std::string schedule_to_string(const Schedule& s);  // compact one-line JSON

// --- schedule spaces -------------------------------------------------------

/// One independent choice in a schedule space: a list of alternatives, each a
/// (possibly empty) list of transforms. Tile and vectorize alternatives are
/// sorted ascending by factor.
struct Knob {
  std::string name;
  std::vector<std::vector<Transform>> alternatives;
};

/// A space is the cross product of its knobs; a schedule concatenates one
/// alternative per knob in knob order.
struct SearchSpace {
  std::vector<Knob> knobs;

  std::size_t cardinality() const;
  Schedule compose(const std::vector<int>& choice) const;
};

/// Parses the space description JSON:
///   {"knobs": [ {"tile": {"loop": "i", "factors": [2, 4, 8]}},
///               {"reorder": {"orders": [["i", "j"], ["j", "i"]]}},
///               {"vectorize": {"loop": "j_i", "widths": [0, 4, 8]}},
///               {"unroll": {"loop": "k", "options": [false, true]}},
///               {"parallel": {"loop": "i_o", "options": [false, true]}} ]}
/// Width 0 / option false mean "leave the loop alone". Tile factors for loops
/// of the original program must divide the loop extent.
SearchSpace parse_space(std::string_view text, const LoopProgram& p);

/// Enumerates the valid, duplicate-free schedules of the space in
/// cross-product order (first knob varies slowest). Combinations that fail to
/// apply are dropped. Throws Error if nothing remains.
std::vector<Schedule> enumerate_space(const LoopProgram& p, const SearchSpace& space);

}  // namespace loopcost
