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

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace loopcost {

/// Partial feature values produced by one analyzer.
struct FeatureContribution {
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::string> diagnostics;

  double get(std::string_view name) const;  // 0 when absent
  void set(const std::string& name, double v);
};

/// Named hardware features in a fixed order.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(const std::vector<std::string>& names);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool has(std::string_view name) const;
  double get(std::string_view name) const;  // throws Error when absent
  void set(const std::string& name, double v);
  void merge(const FeatureContribution& c);

  FeatureVector operator+(const FeatureVector& other) const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// Feature names per target family.
const std::vector<std::string>& cpu_feature_names();
const std::vector<std::string>& gpu_feature_names();

}  // namespace loopcost
