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

#include "loopcost/loop_ir.hpp"
#include "loopcost/target.hpp"

namespace loopcost {

/// Deterministic stand-in for a real code generator. Every emitted loop becomes
/// a labeled block closed by `add; cmp $extent*step; jne label` (x86),
/// `add; cmp #bound; b.ne` (aarch64) or `add; setp.lt; @p bra` (PTX).
/// Unrolled loops are replicated, vectorized loops become vector instructions
/// (replicated scalar code on PTX), and on PTX parallel loops are bound to
/// thread/block indices. Within a loop body a run of accesses ending in a store
/// is one statement; a statement with two or more loads becomes one FMA.
std::string emit_mock_code(const LoopProgram& p, Target target);

}  // namespace loopcost
