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

#include "loopcost/cost_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "loopcost/asm_analysis.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/error.hpp"

namespace loopcost {

bool looks_like_ptx(std::string_view code) {
  return code.find(".entry") != std::string_view::npos || code.find(".version") != std::string_view::npos;
}

FeatureReport extract_features(const LoopProgram& p, std::string_view code, const ArchSpec& arch,
                               const KernelLaunch* launch) {
  FeatureReport r{FeatureVector(arch.feature_names()), {}};
  auto take = [&](const FeatureContribution& c) {
    r.features.merge(c);
    r.diagnostics.insert(r.diagnostics.end(), c.diagnostics.begin(), c.diagnostics.end());
  };
  if (arch.family == Family::kGpu) {
    if (!looks_like_ptx(code)) throw Error("architecture '" + arch.name + "' expects PTX code");
    if (launch == nullptr) throw Error("GPU analysis requires a launch record (--launch)");
    take(gpu_features(p, code, *launch, arch.gpu));
    return r;
  }
  if (looks_like_ptx(code)) throw Error("architecture '" + arch.name + "' expects CPU assembly, got PTX");
  const Cfg cfg = parse_asm(code, dialect_for(arch.target));
  LoopMapResult lm = loop_map(p, cfg);
  r.diagnostics.insert(r.diagnostics.end(), lm.diagnostics.begin(), lm.diagnostics.end());
  take(count_simd(p, cfg, lm.matches, arch.target));
  take(cache_feature(p, arch.cache()));
  take(ilp_feature(cfg, lm.matches, arch.ilp));
  return r;
}

FeatureReport evaluate_schedule(const LoopProgram& p, const Schedule& s, const ArchSpec& arch,
                                const KernelLaunch* launch) {
  const LoopProgram t = apply_schedule(p, s);
  return extract_features(t, emit_mock_code(t, arch.target), arch, launch);
}

double score(const FeatureVector& fv, const ArchSpec& arch) {
  double s = 0;
  for (const auto& [name, value] : fv.entries()) s += arch.coefficient(name) * value;
  return s;
}

std::vector<std::size_t> rank_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

std::vector<RankedCandidate> rank(const std::vector<Candidate>& candidates, const ArchSpec& arch) {
  if (candidates.empty()) throw Error("nothing to rank");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(score(c.features, arch));
  std::vector<RankedCandidate> out;
  for (std::size_t i : rank_order(scores)) out.push_back({i, scores[i]});
  return out;
}

FitResult fit_coefficients(const std::vector<FitSample>& samples, const std::vector<std::string>& names) {
  if (names.empty()) throw Error("no features to fit");
  if (samples.size() < names.size()) {
    throw Error("need at least " + std::to_string(names.size()) + " samples to fit " + std::to_string(names.size()) +
                " coefficients");
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(names.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].features.get(names[j]);
    }
    y(static_cast<Eigen::Index>(i)) = samples[i].latency;
  }
  const Eigen::VectorXd a = x.colPivHouseholderQr().solve(y);
  FitResult r;
  for (std::size_t j = 0; j < names.size(); ++j) r.coefficients.emplace_back(names[j], a(static_cast<Eigen::Index>(j)));
  r.rms_residual = std::sqrt((x * a - y).squaredNorm() / static_cast<double>(samples.size()));
  return r;
}

std::vector<FitSample> parse_fit_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) {
      c.erase(0, c.find_first_not_of(" \t\r"));
      c.erase(c.find_last_not_of(" \t\r") + 1);
      cells.push_back(c);
    }
    return cells;
  };
  if (!std::getline(in, line)) throw Error("empty CSV");
  const std::vector<std::string> header = split(line);
  const auto lat = std::find(header.begin(), header.end(), "latency");
  if (lat == header.end()) throw Error("CSV header has no 'latency' column");
  const std::size_t lat_col = static_cast<std::size_t>(lat - header.begin());
  std::vector<FitSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) throw Error("CSV row " + std::to_string(row) + " has the wrong column count");
    FitSample s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0;
      try {
        std::size_t used = 0;
        v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error("CSV row " + std::to_string(row) + ": '" + cells[c] + "' is not a number");
      }
      if (c == lat_col) {
        s.latency = v;
      } else {
        s.features.set(header[c], v);
      }
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error("CSV has no data rows");
  return out;
}

}  // namespace loopcost
