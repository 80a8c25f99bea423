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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loopcost/arch_spec.hpp"
#include "loopcost/features.hpp"
#include "loopcost/loop_ir.hpp"
#include "loopcost/ptx_analysis.hpp"
#include "loopcost/schedule.hpp"

namespace loopcost {

struct FeatureReport {
  FeatureVector features;
  std::vector<std::string> diagnostics;
};

/// True for text that carries PTX module markers (.entry / .version).
bool looks_like_ptx(std::string_view code);

/// Runs the analyzers of the architecture's family over a program and its
/// generated code. GPU architectures require a launch record.
FeatureReport extract_features(const LoopProgram& p, std::string_view code, const ArchSpec& arch,
                               const KernelLaunch* launch = nullptr);

/// Transforms, emits mock code and extracts features in one step.
FeatureReport evaluate_schedule(const LoopProgram& p, const Schedule& s, const ArchSpec& arch,
                                const KernelLaunch* launch = nullptr);

/// sum(a_i * f_i); lower is better.
double score(const FeatureVector& fv, const ArchSpec& arch);

/// Candidate indices by ascending score; equal scores keep input order.
std::vector<std::size_t> rank_order(const std::vector<double>& scores);

struct Candidate {
  Schedule schedule;
  FeatureVector features;
};

struct RankedCandidate {
  std::size_t index = 0;  // position in the input list
  double score = 0;
};

std::vector<RankedCandidate> rank(const std::vector<Candidate>& candidates, const ArchSpec& arch);

// --- coefficient fitting ---------------------------------------------------

struct FitSample {
  FeatureVector features;
  double latency = 0;
};

struct FitResult {
  std::vector<std::pair<std::string, double>> coefficients;
  double rms_residual = 0;
};

/// Least squares over the given feature names (no intercept). Throws Error with
/// fewer samples than features.
FitResult fit_coefficients(const std::vector<FitSample>& samples, const std::vector<std::string>& names);

/// CSV with a header naming feature columns and one `latency` column.
std::vector<FitSample> parse_fit_csv(std::string_view text);

}  // namespace loopcost
