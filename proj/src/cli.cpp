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

#include "loopcost/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "loopcost/arch_spec.hpp"
#include "loopcost/config.hpp"
#include "loopcost/cost_model.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/error.hpp"
#include "loopcost/es_search.hpp"
#include "loopcost/json_util.hpp"
#include "loopcost/report.hpp"

namespace loopcost {

namespace {

struct CommonOptions {
  std::string arch;
  std::string target;
  std::string launch_path;
  std::string ptxas_info;
  bool json = false;
  std::string out_path;
  bool timing = false;
};

struct Resolved {
  ArchSpec arch;
  std::optional<KernelLaunch> launch;
};

Resolved resolve(const CommonOptions& o) {
  Resolved r;
  if (!o.arch.empty()) {
    r.arch = load_arch_spec(o.arch);
    if (!o.target.empty() && parse_target(o.target) != r.arch.target) {
      throw Error("--target " + o.target + " does not match architecture '" + r.arch.name + "'");
    }
  } else {
    r.arch = load_arch_spec(default_arch_for(parse_target(o.target.empty() ? "x86" : o.target)));
  }
  if (!o.launch_path.empty()) r.launch = parse_launch(json_util::read_file(o.launch_path));
  if (!o.ptxas_info.empty()) {
    if (!r.launch) throw Error("--ptxas-info needs a --launch record to amend");
    apply_ptxas_info(json_util::read_file(o.ptxas_info), *r.launch);
  }
  if (r.arch.family == Family::kGpu && !r.launch) throw Error("GPU architecture '" + r.arch.name + "' requires --launch");
  return r;
}

std::string program_id(const std::string& path) { return std::filesystem::path(path).stem().string(); }

CandidateRecord record(std::size_t index, const Schedule& s, const FeatureVector& fv, double score) {
  CandidateRecord c;
  c.index = index;
  c.schedule = s;
  c.features = fv.entries();
  c.score = score;
  return c;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

void emit_report(const RunReport& r, const CommonOptions& o, std::ostream& out, const std::function<void()>& table) {
  const std::string text = save_report(r);
  if (!o.out_path.empty()) json_util::write_file(o.out_path, text);
  if (o.json) {
    out << text;
  } else {
    table();
  }
}

void print_features(const CandidateRecord& c, std::ostream& out) {
  std::size_t w = 8;
  for (const auto& [n, v] : c.features) w = std::max(w, n.size());
  out << std::left << std::setw(static_cast<int>(w) + 2) << "feature" << "value\n";
  for (const auto& [n, v] : c.features) out << std::left << std::setw(static_cast<int>(w) + 2) << n << fmt(v) << "\n";
  out << std::left << std::setw(static_cast<int>(w) + 2) << "score" << (c.score ? fmt(*c.score) : "-") << "\n";
}

void print_ranking(const std::vector<CandidateRecord>& rows, std::ostream& out) {
  out << std::left << std::setw(6) << "rank" << std::setw(7) << "input" << std::setw(18) << "score" << "schedule\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i];
    out << std::left << std::setw(6) << (c.score ? std::to_string(i + 1) : "-") << std::setw(7) << c.index
        << std::setw(18) << (c.score ? fmt(*c.score) : "failed") << schedule_to_string(c.schedule);
    if (!c.error.empty()) out << "  (" << c.error << ")";
    out << "\n";
  }
}

int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// --- analyze ---------------------------------------------------------------

struct AnalyzeOptions {
  std::string program;
  std::string code;
  std::string schedule;
  bool emit_only = false;
};

int cmd_analyze(const AnalyzeOptions& a, const CommonOptions& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoopProgram base = load_program(a.program);
  const Resolved res = resolve(o);
  Schedule sched;
  if (!a.schedule.empty()) sched = parse_schedule(json_util::read_file(a.schedule));
  const LoopProgram p = apply_schedule(base, sched);
  if (a.emit_only) {
    const std::string code = emit_mock_code(p, res.arch.target);
    if (!o.out_path.empty()) {
      json_util::write_file(o.out_path, code);
    } else {
      out << code;
    }
    return 0;
  }
  const std::string code = a.code.empty() ? emit_mock_code(p, res.arch.target) : json_util::read_file(a.code);
  const FeatureReport fr = extract_features(p, code, res.arch, res.launch ? &*res.launch : nullptr);
  RunReport r;
  r.command = "analyze";
  r.program = program_id(a.program);
  r.arch = res.arch.name;
  r.target = std::string(target_name(res.arch.target));
  r.candidates.push_back(record(0, sched, fr.features, score(fr.features, res.arch)));
  r.best = r.candidates.front();
  r.diagnostics = fr.diagnostics;
  if (o.timing) {
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  emit_report(r, o, out, [&] {
    out << "program: " << r.program << "  arch: " << r.arch << "\n";
    print_features(r.candidates.front(), out);
    for (const auto& d : r.diagnostics) out << "note: " << d << "\n";
  });
  return 0;
}

// --- emit ------------------------------------------------------------------

int cmd_emit(const AnalyzeOptions& a, const CommonOptions& o, std::ostream& out) {
  const LoopProgram base = load_program(a.program);
  Schedule sched;
  if (!a.schedule.empty()) sched = parse_schedule(json_util::read_file(a.schedule));
  const LoopProgram p = apply_schedule(base, sched);
  Target t = parse_target(o.target.empty() ? "x86" : o.target);
  if (!o.arch.empty()) t = load_arch_spec(o.arch).target;
  const std::string code = emit_mock_code(p, t);
  if (!o.out_path.empty()) {
    json_util::write_file(o.out_path, code);
  } else {
    out << code;
  }
  return 0;
}

// --- rank ------------------------------------------------------------------

struct RankOptions {
  std::string program;
  std::string schedules;
  int jobs = 0;
};

int cmd_rank(const RankOptions& a, const CommonOptions& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoopProgram p = load_program(a.program);
  const Resolved res = resolve(o);
  const std::vector<Schedule> list = parse_schedule_list(json_util::read_file(a.schedules));
  if (list.empty()) throw Error("schedule list is empty");
  std::vector<CandidateRecord> rows(list.size());
  parallel_for(list.size(), a.jobs > 0 ? a.jobs : default_jobs(), [&](std::size_t i) {
    rows[i].index = i;
    rows[i].schedule = list[i];
    try {
      const FeatureReport fr = evaluate_schedule(p, list[i], res.arch, res.launch ? &*res.launch : nullptr);
      rows[i] = record(i, list[i], fr.features, score(fr.features, res.arch));
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });
  std::vector<double> scores;
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].score) {
      ok.push_back(i);
      scores.push_back(*rows[i].score);
    }
  }
  RunReport r;
  r.command = "rank";
  r.program = program_id(a.program);
  r.arch = res.arch.name;
  r.target = std::string(target_name(res.arch.target));
  for (std::size_t k : rank_order(scores)) r.candidates.push_back(rows[ok[k]]);
  for (const auto& row : rows) {
    if (!row.score) {
      r.candidates.push_back(row);
      r.diagnostics.push_back("schedule " + std::to_string(row.index) + " failed: " + row.error);
    }
  }
  if (!ok.empty()) r.best = r.candidates.front();
  if (o.timing) {
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  emit_report(r, o, out, [&] {
    out << "program: " << r.program << "  arch: " << r.arch << "  candidates: " << rows.size() << "\n";
    print_ranking(r.candidates, out);
  });
  return ok.empty() ? 1 : 0;
}

// --- search ----------------------------------------------------------------

struct SearchCli {
  std::string program;
  std::string space;
  std::string search_config;
  std::string trace_path;
  std::optional<uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> sigma;
  std::optional<int> population;
  std::optional<int> iterations;
  bool no_rank_normalize = false;
  int jobs = 0;
  std::size_t top_k = 10;
};

EsParams search_params(const SearchCli& s) {
  EsParams p;
  if (!s.search_config.empty()) {
    const config::Document doc = config::Document::Parse(json_util::read_file(s.search_config));
    const std::string sec = doc.has_section("search") ? "search" : "";
    for (const auto& k : doc.keys(sec)) {
      if (k != "alpha" && k != "sigma" && k != "population" && k != "iterations" && k != "seed" &&
          k != "rank_normalize") {
        throw Error("unknown search config key '" + k + "'");
      }
    }
    p.alpha = doc.get_number(sec, "alpha", p.alpha);
    p.sigma = doc.get_number(sec, "sigma", p.sigma);
    p.population = static_cast<int>(doc.get_int(sec, "population", p.population));
    p.iterations = static_cast<int>(doc.get_int(sec, "iterations", p.iterations));
    const int64_t seed = doc.get_int(sec, "seed", static_cast<int64_t>(p.seed));
    if (seed < 0) throw Error("seed must be non-negative");
    p.seed = static_cast<uint64_t>(seed);
    p.rank_normalize = doc.get_bool(sec, "rank_normalize", p.rank_normalize);
  }
  if (s.alpha) p.alpha = *s.alpha;
  if (s.sigma) p.sigma = *s.sigma;
  if (s.population) p.population = *s.population;
  if (s.iterations) p.iterations = *s.iterations;
  if (s.seed) p.seed = *s.seed;
  if (s.no_rank_normalize) p.rank_normalize = false;
  p.validate();
  return p;
}

int cmd_search(const SearchCli& s, const CommonOptions& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoopProgram p = load_program(s.program);
  const Resolved res = resolve(o);
  const SearchSpace space = parse_space(json_util::read_file(s.space), p);
  SearchOptions so;
  so.es = search_params(s);
  so.jobs = s.jobs > 0 ? s.jobs : default_jobs();
  so.top_k = s.top_k;
  so.launch = res.launch ? &*res.launch : nullptr;
  const SearchResult sr = optimize(p, space, res.arch, so);

  RunReport r;
  r.command = "search";
  r.program = program_id(s.program);
  r.arch = res.arch.name;
  r.target = std::string(target_name(res.arch.target));
  for (std::size_t i = 0; i < sr.top.size(); ++i) {
    r.candidates.push_back(record(i, sr.top[i].schedule, sr.top[i].features, sr.top[i].score));
  }
  r.best = record(0, sr.best.schedule, sr.best.features, sr.best.score);
  r.trace = sr.trace;
  r.evaluations = static_cast<int64_t>(sr.evaluations);
  r.diagnostics = sr.diagnostics;
  if (o.timing) {
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  if (!s.trace_path.empty()) {
    std::ostringstream csv;
    csv << "iteration,best_score\n";
    for (std::size_t i = 0; i < sr.trace.size(); ++i) csv << i << "," << fmt(sr.trace[i]) << "\n";
    json_util::write_file(s.trace_path, csv.str());
  }
  emit_report(r, o, out, [&] {
    out << "program: " << r.program << "  arch: " << r.arch << "  evaluated: " << sr.evaluations
        << "  iterations: " << so.es.iterations << "\n";
    out << "best score: " << fmt(sr.best.score) << "\n";
    out << "best schedule: " << schedule_to_string(sr.best.schedule) << "\n";
    print_ranking(r.candidates, out);
    for (const auto& d : r.diagnostics) out << "note: " << d << "\n";
  });
  return 0;
}

// --- fit -------------------------------------------------------------------

int cmd_fit(const std::string& csv, const CommonOptions& o, std::ostream& out) {
  const std::vector<FitSample> samples = parse_fit_csv(json_util::read_file(csv));
  std::vector<std::string> names;
  if (!o.arch.empty() || !o.target.empty()) {
    CommonOptions copy = o;
    copy.launch_path.clear();
    ArchSpec arch = !o.arch.empty() ? load_arch_spec(o.arch) : load_arch_spec(default_arch_for(parse_target(o.target)));
    names = arch.feature_names();
  } else {
    for (const auto& [n, v] : samples.front().features.entries()) names.push_back(n);
  }
  const FitResult fr = fit_coefficients(samples, names);
  std::ostringstream toml;
  toml << "[coefficients]\n";
  for (const auto& [n, v] : fr.coefficients) toml << n << " = " << std::setprecision(12) << v << "\n";
  toml << "# rms residual: " << fmt(fr.rms_residual) << "\n";
  if (!o.out_path.empty()) {
    json_util::write_file(o.out_path, toml.str());
  } else {
    out << toml.str();
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_launch) {
  cmd->add_option("--arch", o.arch, "architecture spec file or builtin name (x86-avx2, aarch64-neon, nvidia-volta)");
  cmd->add_option("--target", o.target, "x86, aarch64 or ptx (selects the builtin spec when --arch is absent)");
  if (with_launch) {
    cmd->add_option("--launch", o.launch_path, "kernel launch record (JSON) for GPU analysis");
    cmd->add_option("--ptxas-info", o.ptxas_info, "ptxas -v output overriding register/shared-memory usage");
  }
  cmd->add_flag("--json", o.json, "print the JSON report instead of a table");
  cmd->add_option("--out", o.out_path, "write the JSON report (or code) to this file");
  cmd->add_flag("--timing", o.timing, "include wall-clock time in the report");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Static cost model and schedule search for loop-nest tensor programs", "loopcost"};
  app.require_subcommand(1);
  CommonOptions common;

  AnalyzeOptions analyze;
  CLI::App* an = app.add_subcommand("analyze", "extract features and the model score of one program");
  an->add_option("program", analyze.program, "program JSON")->required();
  an->add_option("--code", analyze.code, "assembly or PTX file (default: mock code generator)");
  an->add_option("--schedule", analyze.schedule, "schedule JSON applied before analysis");
  an->add_flag("--emit-only", analyze.emit_only, "write the generated code and stop");
  add_common(an, common, true);

  RankOptions rank_opts;
  CLI::App* rk = app.add_subcommand("rank", "score and order a list of schedules");
  rk->add_option("program", rank_opts.program, "program JSON")->required();
  rk->add_option("schedules", rank_opts.schedules, "JSON list of schedules")->required();
  rk->add_option("--jobs", rank_opts.jobs, "worker threads (default: hardware concurrency)");
  add_common(rk, common, true);

  SearchCli search;
  CLI::App* se = app.add_subcommand("search", "Evolution Strategies search over a schedule space");
  se->add_option("program", search.program, "program JSON")->required();
  se->add_option("space", search.space, "schedule space JSON")->required();
  se->add_option("--seed", search.seed, "random seed");
  se->add_option("--jobs", search.jobs, "worker threads (default: hardware concurrency)");
  se->add_option("--top-k", search.top_k, "number of best distinct schedules to report")->check(CLI::PositiveNumber);
  se->add_option("--trace", search.trace_path, "write the per-iteration best score as CSV");
  se->add_option("--search-config", search.search_config, "TOML file with alpha, sigma, population, iterations, seed");
  se->add_option("--alpha", search.alpha, "learning rate");
  se->add_option("--sigma", search.sigma, "noise standard deviation");
  se->add_option("--population", search.population, "candidates per iteration");
  se->add_option("--iterations", search.iterations, "number of iterations");
  se->add_flag("--no-rank-normalize", search.no_rank_normalize, "use raw fitness values in the update");
  add_common(se, common, true);

  AnalyzeOptions emit;
  CLI::App* em = app.add_subcommand("emit", "print mock code for a program");
  em->add_option("program", emit.program, "program JSON")->required();
  em->add_option("--schedule", emit.schedule, "schedule JSON applied first");
  em->add_option("--arch", common.arch, "architecture (selects the target)");
  em->add_option("--target", common.target, "x86, aarch64 or ptx");
  em->add_option("--out", common.out_path, "output file");

  std::string fit_csv;
  CLI::App* ft = app.add_subcommand("fit", "least-squares coefficients from (features, latency) CSV");
  ft->add_option("csv", fit_csv, "CSV with feature columns and a latency column")->required();
  ft->add_option("--arch", common.arch, "fit the feature set of this architecture");
  ft->add_option("--target", common.target, "fit the feature set of this target's builtin");
  ft->add_option("--out", common.out_path, "output file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (an->parsed()) return cmd_analyze(analyze, common, out);
    if (rk->parsed()) return cmd_rank(rank_opts, common, out);
    if (se->parsed()) return cmd_search(search, common, out);
    if (em->parsed()) return cmd_emit(emit, common, out);
    if (ft->parsed()) return cmd_fit(fit_csv, common, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  err << "internal error: no subcommand\n";
  return 2;
}

}  // namespace loopcost
