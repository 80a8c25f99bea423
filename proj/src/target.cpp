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

#include "loopcost/target.hpp"

#include "loopcost/error.hpp"

namespace loopcost {

Target parse_target(std::string_view name) {
  if (name == "x86" || name == "cpu-x86" || name == "x86-att" || name == "x86-64") return Target::kX86;
  if (name == "aarch64" || name == "cpu-aarch64" || name == "arm64") return Target::kAArch64;
  if (name == "ptx" || name == "gpu-ptx") return Target::kPtx;
  throw Error("unsupported target '" + std::string(name) + "' (expected x86, aarch64 or ptx)");
}

std::string_view target_name(Target t) {
  switch (t) {
    case Target::kX86:
      return "x86";
    case Target::kAArch64:
      return "aarch64";
    case Target::kPtx:
      return "ptx";
  }
  return "?";
}

}  // namespace loopcost
