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
#include <string_view>
#include <variant>
#include <vector>

namespace loopcost::config {

/// A scalar value of the configuration format.
using Value = std::variant<bool, int64_t, double, std::string>;

/// Flat view of a TOML document restricted to what the architecture files use:
/// `[section]` / `[a.b]` headers, `key = value` pairs with bare or quoted keys,
/// integers, floats, booleans, basic strings and `#` comments.
class Document {
 public:
  static Document Parse(std::string_view text);  // throws ParseError

  bool has_section(std::string_view section) const;
  /// Keys of a section in file order (empty when absent).
  std::vector<std::string> keys(std::string_view section) const;
  bool has(std::string_view section, std::string_view key) const;
  const Value& get(std::string_view section, std::string_view key) const;  // throws Error

  int64_t get_int(std::string_view section, std::string_view key) const;
  double get_number(std::string_view section, std::string_view key) const;  // int or float
  std::string get_string(std::string_view section, std::string_view key) const;
  bool get_bool(std::string_view section, std::string_view key) const;

  int64_t get_int(std::string_view section, std::string_view key, int64_t fallback) const;
  double get_number(std::string_view section, std::string_view key, double fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, Value>> entries;
  };
  const Section* find(std::string_view section) const;
  std::vector<Section> sections_;
};

}  // namespace loopcost::config
