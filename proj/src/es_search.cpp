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

#include "loopcost/es_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "loopcost/cost_model.hpp"
#include "loopcost/emitter.hpp"
#include "loopcost/error.hpp"

namespace loopcost {

void EsParams::validate() const {
  if (!(alpha > 0) || !std::isfinite(alpha)) throw Error("alpha must be positive");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw Error("sigma must be positive");
  if (population < 2) throw Error("population must be at least 2");
  if (antithetic && population % 2 != 0) throw Error("antithetic sampling needs an even population");
  if (iterations < 1) throw Error("iterations must be at least 1");
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Theta sample_noise(uint64_t seed, int64_t t, int64_t i, std::size_t dim) {
  const uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ static_cast<uint64_t>(t)) ^ static_cast<uint64_t>(i));
  std::mt19937_64 rng(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  Theta e(dim);
  for (auto& x : e) x = normal(rng);
  return e;
}

std::vector<Theta> population_noise(const EsParams& params, int64_t t, std::size_t dim) {
  std::vector<Theta> eps;
  eps.reserve(static_cast<std::size_t>(params.population));
  for (int i = 0; i < params.population; ++i) {
    if (params.antithetic && i % 2 == 1) {
      Theta neg = eps.back();
      for (auto& x : neg) x = -x;
      eps.push_back(std::move(neg));
    } else {
      eps.push_back(sample_noise(params.seed, t, params.antithetic ? i / 2 : i, dim));
    }
  }
  return eps;
}

Theta es_update(const Theta& theta, const std::vector<Theta>& eps, const std::vector<double>& fitness, double alpha,
                double sigma) {
  if (eps.size() != fitness.size() || eps.empty()) throw InternalError("es_update: mismatched population");
  Theta sum(theta.size(), 0.0);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    for (std::size_t d = 0; d < theta.size(); ++d) sum[d] += fitness[i] * eps[i][d];
  }
  Theta out = theta;
  const double scale = alpha / (static_cast<double>(eps.size()) * sigma);
  for (std::size_t d = 0; d < theta.size(); ++d) out[d] += scale * sum[d];
  return out;
}

std::vector<double> rank_normalize(const std::vector<double>& fitness) {
  const std::size_t n = fitness.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && fitness[order[j + 1]] == fitness[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg_rank / static_cast<double>(n - 1) - 0.5;
    i = j + 1;
  }
  return out;
}

std::size_t repair_fitness(std::vector<double>& fitness) {
  double lowest = std::numeric_limits<double>::infinity();
  for (double f : fitness) {
    if (std::isfinite(f)) lowest = std::min(lowest, f);
  }
  if (!std::isfinite(lowest)) lowest = 0.0;
  std::size_t replaced = 0;
  for (double& f : fitness) {
    if (!std::isfinite(f)) {
      f = lowest;
      ++replaced;
    }
  }
  return replaced;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

std::vector<EvalOutcome> evaluate_population(const std::vector<Theta>& thetas, const Objective& f, int jobs) {
  std::vector<EvalOutcome> out(thetas.size());
  parallel_for(thetas.size(), jobs, [&](std::size_t i) {
    try {
      out[i].value = f(thetas[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

EsStep es_step(const Theta& theta, const EsParams& params, int64_t t, const Objective& f, int jobs) {
  params.validate();
  EsStep s;
  s.eps = population_noise(params, t, theta.size());
  for (const auto& e : s.eps) {
    Theta x = theta;
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += params.sigma * e[d];
    s.samples.push_back(std::move(x));
  }
  const std::vector<EvalOutcome> res = evaluate_population(s.samples, f, jobs);
  for (std::size_t i = 0; i < res.size(); ++i) {
    s.fitness.push_back(res[i].value.value_or(std::numeric_limits<double>::quiet_NaN()));
    if (!res[i].error.empty()) s.diagnostics.push_back("candidate " + std::to_string(i) + ": " + res[i].error);
  }
  if (const std::size_t bad = repair_fitness(s.fitness); bad > 0) {
    s.diagnostics.push_back(std::to_string(bad) + " candidate(s) without a finite fitness took the population minimum");
  }
  const std::vector<double> shaped = params.rank_normalize ? rank_normalize(s.fitness) : s.fitness;
  s.theta = es_update(theta, s.eps, shaped, params.alpha, params.sigma);
  return s;
}

EsRun run_es(const Theta& theta0, const EsParams& params, const Objective& f, int jobs) {
  params.validate();
  EsRun r;
  r.theta = theta0;
  r.best_theta = theta0;
  r.best_fitness = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < params.iterations; ++t) {
    EsStep s = es_step(r.theta, params, t, f, jobs);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      if (s.fitness[i] > r.best_fitness) {
        r.best_fitness = s.fitness[i];
        r.best_theta = s.samples[i];
      }
    }
    r.theta = std::move(s.theta);
    r.trace.push_back(r.best_fitness);
  }
  return r;
}

ThetaEncoding ThetaEncoding::For(const SearchSpace& space) {
  ThetaEncoding e;
  for (std::size_t k = 0; k < space.knobs.size(); ++k) {
    e.sizes.push_back(space.knobs[k].alternatives.size());
    if (space.knobs[k].alternatives.size() >= 2) e.dims.push_back(k);
  }
  return e;
}

std::vector<int> ThetaEncoding::decode(const Theta& theta) const {
  if (theta.size() != dims.size()) throw InternalError("theta dimension does not match the encoding");
  std::vector<int> choice(sizes.size(), 0);
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const double m = static_cast<double>(sizes[dims[d]] - 1);
    const double x = std::isfinite(theta[d]) ? theta[d] : 0.5;
    const double idx = std::clamp(std::round(x * m), 0.0, m);
    choice[dims[d]] = static_cast<int>(idx);
  }
  return choice;
}

namespace {

struct Evaluation {
  bool feasible = false;
  std::string error;  // analysis failure
  ScoredSchedule result;
  std::size_t sequence = 0;
};

class ScheduleSearch {
 public:
  ScheduleSearch(const LoopProgram& p, const SearchSpace& space, const ArchSpec& arch, const SearchOptions& o)
      : p_(p), space_(space), arch_(arch), o_(o), enc_(ThetaEncoding::For(space)) {}

  SearchResult run() {
    SearchResult r;
    if (enc_.dimension() == 0) {
      evaluate({enc_.decode({})});
      finish(r);
      r.trace.push_back(r.best.score);
      return r;
    }
    Theta theta = enc_.centroid();
    evaluate({enc_.decode(theta)});
    for (int t = 0; t < o_.es.iterations; ++t) {
      const std::vector<Theta> eps = population_noise(o_.es, t, theta.size());
      std::vector<std::vector<int>> choices;
      for (const auto& e : eps) {
        Theta x = theta;
        for (std::size_t d = 0; d < x.size(); ++d) x[d] += o_.es.sigma * e[d];
        choices.push_back(enc_.decode(x));
      }
      evaluate(choices);
      std::vector<double> fitness;
      for (const auto& c : choices) {
        const Evaluation& ev = memo_.at(c);
        fitness.push_back(ev.feasible ? -ev.result.score : std::numeric_limits<double>::quiet_NaN());
      }
      if (repair_fitness(fitness) == fitness.size()) {
        diagnostics_.push_back("iteration " + std::to_string(t) + ": no feasible candidate");
      }
      const std::vector<double> shaped = o_.es.rank_normalize ? rank_normalize(fitness) : fitness;
      theta = es_update(theta, eps, shaped, o_.es.alpha, o_.es.sigma);
      for (auto& x : theta) x = std::clamp(x, 0.0, 1.0);
      trace_.push_back(best_score());
    }
    finish(r);
    r.trace = trace_;
    return r;
  }

 private:
  double best_score() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [c, ev] : memo_) {
      if (ev.feasible) best = std::min(best, ev.result.score);
    }
    return best;
  }

  // Evaluates choices not seen before, in parallel, keeping first-seen order.
  void evaluate(const std::vector<std::vector<int>>& choices) {
    std::vector<std::vector<int>> fresh;
    for (const auto& c : choices) {
      if (memo_.count(c) == 0 && std::find(fresh.begin(), fresh.end(), c) == fresh.end()) fresh.push_back(c);
    }
    std::vector<Evaluation> out(fresh.size());
    parallel_for(fresh.size(), o_.jobs, [&](std::size_t i) { out[i] = evaluate_one(fresh[i]); });
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      if (!out[i].error.empty()) {
        throw Error("analysis failed for schedule " + schedule_to_string(out[i].result.schedule) + ": " +
                    out[i].error);
      }
      out[i].sequence = next_sequence_++;
      memo_.emplace(fresh[i], std::move(out[i]));
    }
  }

  Evaluation evaluate_one(const std::vector<int>& choice) const {
    Evaluation ev;
    ev.result.schedule = space_.compose(choice);
    LoopProgram t;
    try {
      t = apply_schedule(p_, ev.result.schedule);
    } catch (const Error&) {
      return ev;  // infeasible combination
    }
    try {
      const FeatureReport fr = extract_features(t, emit_mock_code(t, arch_.target), arch_, o_.launch);
      ev.result.features = fr.features;
      ev.result.score = score(fr.features, arch_);
      ev.feasible = std::isfinite(ev.result.score);
      if (!ev.feasible) ev.error = "non-finite score";
    } catch (const std::exception& e) {
      ev.error = e.what();
    }
    return ev;
  }

  void finish(SearchResult& r) {
    std::vector<const Evaluation*> ok;
    std::size_t infeasible = 0;
    for (const auto& [c, ev] : memo_) {
      if (ev.feasible) {
        ok.push_back(&ev);
      } else {
        ++infeasible;
      }
    }
    if (ok.empty()) throw Error("no evaluated schedule could be applied to the program");
    std::sort(ok.begin(), ok.end(), [](const Evaluation* a, const Evaluation* b) {
      if (a->result.score != b->result.score) return a->result.score < b->result.score;
      return a->sequence < b->sequence;
    });
    r.best = ok.front()->result;
    for (std::size_t i = 0; i < ok.size() && i < o_.top_k; ++i) r.top.push_back(ok[i]->result);
    r.evaluations = memo_.size();
    r.infeasible = infeasible;
    r.diagnostics = diagnostics_;
    if (infeasible > 0) {
      r.diagnostics.push_back(std::to_string(infeasible) + " decoded schedule(s) could not be applied and were skipped");
    }
  }

  const LoopProgram& p_;
  const SearchSpace& space_;
  const ArchSpec& arch_;
  SearchOptions o_;
  ThetaEncoding enc_;
  std::map<std::vector<int>, Evaluation> memo_;
  std::size_t next_sequence_ = 0;
  std::vector<double> trace_;
  std::vector<std::string> diagnostics_;
};

}  // namespace

SearchResult optimize(const LoopProgram& p, const SearchSpace& space, const ArchSpec& arch,
                      const SearchOptions& options) {
  options.es.validate();
  if (space.cardinality() == 0) throw Error("empty search space");
  return ScheduleSearch(p, space, arch, options).run();
}

}  // namespace loopcost
