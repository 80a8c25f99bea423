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

namespace loopcost {

enum class Target { kX86, kAArch64, kPtx };

/// Accepts "x86", "cpu-x86", "x86-att", "aarch64", "cpu-aarch64", "ptx", "gpu-ptx".
Target parse_target(std::string_view name);
std::string_view target_name(Target t);
inline bool is_gpu(Target t) { return t == Target::kPtx; }

}  // namespace loopcost
