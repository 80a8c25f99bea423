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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loopcost/arch_spec.hpp"
#include "loopcost/loop_ir.hpp"
#include "loopcost/ptx_analysis.hpp"
#include "loopcost/schedule.hpp"

namespace loopcost {

struct EsParams {
  double alpha = 0.05;
  double sigma = 0.3;
  int population = 16;
  int iterations = 20;
  uint64_t seed = 0;
  bool rank_normalize = true;
  bool antithetic = true;

  void validate() const;  // throws Error
};

using Theta = std::vector<double>;
/// Fitness to maximize.
using Objective = std::function<double(const Theta&)>;

/// Standard normal noise for candidate `i` of iteration `t`, drawn from a
/// generator seeded only by (seed, t, i), so the draw order of other
/// candidates cannot change it.
Theta sample_noise(uint64_t seed, int64_t t, int64_t i, std::size_t dim);

/// The population's noise vectors; with `antithetic`, pairs (e, -e) share one draw.
std::vector<Theta> population_noise(const EsParams& params, int64_t t, std::size_t dim);

/// theta + alpha / (n * sigma) * sum_i F_i * eps_i.
Theta es_update(const Theta& theta, const std::vector<Theta>& eps, const std::vector<double>& fitness, double alpha,
                double sigma);

/// Centered ranks in [-0.5, 0.5]; tied values share their average rank.
std::vector<double> rank_normalize(const std::vector<double>& fitness);

/// Replaces non-finite entries by the minimum finite value (0 if none).
/// Returns the number of replaced entries.
std::size_t repair_fitness(std::vector<double>& fitness);

struct EvalOutcome {
  std::optional<double> value;
  std::string error;  // set when evaluation threw
};

/// Evaluates every input, concurrently on `jobs` workers; results are in input
/// order and exceptions are recorded per candidate.
std::vector<EvalOutcome> evaluate_population(const std::vector<Theta>& thetas, const Objective& f, int jobs);

/// Generic parallel map used by the search and the CLI.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

struct EsStep {
  Theta theta;                  // updated parameters
  std::vector<Theta> eps;
  std::vector<Theta> samples;   // theta + sigma * eps
  std::vector<double> fitness;  // raw, after repair
  std::vector<std::string> diagnostics;
};

EsStep es_step(const Theta& theta, const EsParams& params, int64_t t, const Objective& f, int jobs = 1);

struct EsRun {
  Theta theta;        // final mean
  Theta best_theta;   // best sample ever evaluated
  double best_fitness = 0;
  std::vector<double> trace;  // best fitness after each iteration
};

/// Runs `params.iterations` steps from theta0 on a continuous objective.
EsRun run_es(const Theta& theta0, const EsParams& params, const Objective& f, int jobs = 1);

// --- schedule search -------------------------------------------------------

/// Knobs with at least two alternatives each own one coordinate in [0, 1].
struct ThetaEncoding {
  std::vector<std::size_t> dims;   // knob index per coordinate
  std::vector<std::size_t> sizes;  // alternatives per knob

  static ThetaEncoding For(const SearchSpace& space);
  std::size_t dimension() const { return dims.size(); }
  /// idx = clamp(round(theta * (m - 1)), 0, m - 1) per coordinate; single-choice knobs take 0.
  std::vector<int> decode(const Theta& theta) const;
  Theta centroid() const { return Theta(dims.size(), 0.5); }
};

struct ScoredSchedule {
  Schedule schedule;
  double score = 0;
  FeatureVector features;
};

struct SearchResult {
  ScoredSchedule best;
  std::vector<double> trace;        // incumbent score after each iteration
  std::vector<ScoredSchedule> top;  // distinct evaluated schedules, ascending score
  std::size_t evaluations = 0;      // distinct schedules evaluated
  std::size_t infeasible = 0;       // decoded choices that failed to apply
  std::vector<std::string> diagnostics;
};

struct SearchOptions {
  EsParams es;
  int jobs = 1;
  std::size_t top_k = 10;
  const KernelLaunch* launch = nullptr;
};

/// Evolution Strategies over a schedule space minimizing the model score.
/// Throws Error naming the candidate when analysis of a valid schedule fails.
SearchResult optimize(const LoopProgram& p, const SearchSpace& space, const ArchSpec& arch,
                      const SearchOptions& options);

}  // namespace loopcost
