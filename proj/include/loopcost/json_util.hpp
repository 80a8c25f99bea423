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

#include "json.hpp"

namespace loopcost::json_util {

/// Parses JSON, converting nlohmann's byte offset into a line/column ParseError.
nlohmann::json parse_with_position(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string get_string(const nlohmann::json& j, const char* key);
/// Integer field that must be known statically (rejects strings such as "N").
int64_t get_static_int(const nlohmann::json& j, const char* key);

}  // namespace loopcost::json_util
