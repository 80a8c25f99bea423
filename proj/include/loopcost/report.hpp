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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loopcost/schedule.hpp"

namespace loopcost {

struct CandidateRecord {
  std::size_t index = 0;
  Schedule schedule;
  std::vector<std::pair<std::string, double>> features;
  std::optional<double> score;  // empty for failed candidates
  std::string error;

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

/// Result of one CLI command. Wall-clock timing is only serialized when set,
/// so default reports are byte-identical across runs.
struct RunReport {
  std::string command;
  std::string program;
  std::string arch;
  std::string target;
  std::vector<CandidateRecord> candidates;
  std::optional<CandidateRecord> best;
  std::vector<double> trace;
  std::optional<int64_t> evaluations;
  std::vector<std::string> diagnostics;
  std::optional<double> elapsed_seconds;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

std::string save_report(const RunReport& r);  // pretty JSON with a trailing newline
RunReport load_report(std::string_view text);

}  // namespace loopcost
