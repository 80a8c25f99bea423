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

#include "loopcost/features.hpp"

#include <algorithm>
#include <cmath>

#include "loopcost/error.hpp"

namespace loopcost {

double FeatureContribution::get(std::string_view name) const {
  for (const auto& [n, v] : values) {
    if (n == name) return v;
  }
  return 0.0;
}

void FeatureContribution::set(const std::string& name, double v) {
  for (auto& [n, old] : values) {
    if (n == name) {
      old = v;
      return;
    }
  }
  values.emplace_back(name, v);
}

FeatureVector::FeatureVector(const std::vector<std::string>& names) {
  for (const auto& n : names) entries_.emplace_back(n, 0.0);
}

bool FeatureVector::has(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

double FeatureVector::get(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw Error("feature '" + std::string(name) + "' not present");
}

void FeatureVector::set(const std::string& name, double v) {
  if (!std::isfinite(v) || v < 0) {
    throw InternalError("feature '" + name + "' must be finite and non-negative, got " + std::to_string(v));
  }
  for (auto& [n, old] : entries_) {
    if (n == name) {
      old = v;
      return;
    }
  }
  entries_.emplace_back(name, v);
}

void FeatureVector::merge(const FeatureContribution& c) {
  for (const auto& [n, v] : c.values) {
    if (has(n)) set(n, v);
  }
}

FeatureVector FeatureVector::operator+(const FeatureVector& other) const {
  FeatureVector out = *this;
  for (const auto& [n, v] : other.entries_) out.set(n, (out.has(n) ? out.get(n) : 0.0) + v);
  return out;
}

const std::vector<std::string>& cpu_feature_names() {
  static const std::vector<std::string> names = {"n_fma", "n_vload", "n_vstore", "est_l1_movement", "ilp_cycles"};
  return names;
}

const std::vector<std::string>& gpu_feature_names() {
  static const std::vector<std::string> names = {"workload_per_thread", "sm_underuse", "warp_slack",
                                                 "n_smem_ops_adjusted", "n_fma", "n_ld", "n_st"};
  return names;
}

}  // namespace loopcost
