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

#include "loopcost/report.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "loopcost/error.hpp"
#include "loopcost/json_util.hpp"

namespace loopcost {

namespace {

using ojson = nlohmann::ordered_json;

ojson candidate_to_json(const CandidateRecord& c) {
  ojson j;
  j["index"] = c.index;
  j["schedule"] = ojson::parse(schedule_to_json(c.schedule).dump());
  ojson f = ojson::object();
  for (const auto& [n, v] : c.features) f[n] = v;
  j["features"] = f;
  j["score"] = c.score ? ojson(*c.score) : ojson(nullptr);
  if (!c.error.empty()) j["error"] = c.error;
  return j;
}

CandidateRecord candidate_from_json(const ojson& j) {
  CandidateRecord c;
  c.index = j.at("index").get<std::size_t>();
  c.schedule = schedule_from_json(nlohmann::json::parse(j.at("schedule").dump()));
  for (const auto& [k, v] : j.at("features").items()) c.features.emplace_back(k, v.get<double>());
  if (!j.at("score").is_null()) c.score = j.at("score").get<double>();
  if (j.contains("error")) c.error = j.at("error").get<std::string>();
  return c;
}

}  // namespace

std::string save_report(const RunReport& r) {
  ojson j;
  j["command"] = r.command;
  j["program"] = r.program;
  j["arch"] = r.arch;
  j["target"] = r.target;
  ojson cands = ojson::array();
  for (const auto& c : r.candidates) cands.push_back(candidate_to_json(c));
  j["candidates"] = cands;
  j["best"] = r.best ? candidate_to_json(*r.best) : ojson(nullptr);
  ojson trace = ojson::array();
  for (double t : r.trace) trace.push_back(std::isfinite(t) ? ojson(t) : ojson(nullptr));  // no incumbent yet
  j["trace"] = trace;
  if (r.evaluations) j["evaluations"] = *r.evaluations;
  j["diagnostics"] = r.diagnostics;
  if (r.elapsed_seconds) j["elapsed_seconds"] = *r.elapsed_seconds;
  return j.dump(2) + "\n";
}

RunReport load_report(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);  // keeps feature order
  } catch (const nlohmann::json::parse_error&) {
    json_util::parse_with_position(text);  // rethrows with line and column
    throw;
  }
  RunReport r;
  try {
    r.command = j.at("command").get<std::string>();
    r.program = j.at("program").get<std::string>();
    r.arch = j.at("arch").get<std::string>();
    r.target = j.at("target").get<std::string>();
    for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from_json(c));
    if (!j.at("best").is_null()) r.best = candidate_from_json(j.at("best"));
    for (const auto& t : j.at("trace")) {
      r.trace.push_back(t.is_null() ? std::numeric_limits<double>::infinity() : t.get<double>());
    }
    if (j.contains("evaluations")) r.evaluations = j.at("evaluations").get<int64_t>();
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    if (j.contains("elapsed_seconds")) r.elapsed_seconds = j.at("elapsed_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace loopcost
