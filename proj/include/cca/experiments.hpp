// Copyright 2026 The CCA Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Named experiments behind the command-line tool. Each returns a typed
// result plus the verdict used for the exit code, so tests can drive them
// without a process boundary.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cca/composition.hpp"
#include "cca/oracle.hpp"
#include "cca/predictor.hpp"
#include "cca/retrofit.hpp"
#include "cca/verify.hpp"

namespace cca {

/// Exit codes shared by every command.
enum ExitCode : int { kExitPass = 0, kExitViolated = 1, kExitUsage = 2 };

/// Trial i of a campaign seeded with `master` uses master XOR i.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t i) { return master ^ i; }

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results stay in
/// index order, so output does not depend on scheduling.
template <class R, class F>
std::vector<R> parallel_trials(std::size_t n, F fn, unsigned threads = std::thread::hardware_concurrency()) {
  std::vector<R> out(n);
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) out[i] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

struct CounterexampleResult {
  Rational p;
  CcaReport next_token;  ///< at rho = 1, delta = 0
  CcaReport rollout;     ///< at the requested (rho, delta)
  ExtendedRational next_token_min_rho;
  ExtendedRational rollout_min_rho;
  /// min_ratio(conditional, counterfactual) at x = λ, S = {s1}.
  ExtendedRational directional_ratio;

  bool reproduced() const { return next_token.overall && !rollout.overall; }
};

/// Builds the non-composing predictor for p and checks both levels.
/// Requires p < (1/rho)(1 - delta), the condition under which its rollout
/// cannot be (rho, delta)-CCA.
inline CounterexampleResult cmd_counterexample(const Rational& p, const Rational& rho, const Rational& delta) {
  if (rho < 1) throw std::invalid_argument("rho must be >= 1");
  if (delta < 0 || delta >= 1) throw std::invalid_argument("delta must lie in [0,1)");
  if (!(p > 0 && p < (1 - delta) / rho)) {
    throw std::invalid_argument("need 0 < p < e^-eps (1 - delta) = " + to_string((1 - delta) / rho) +
                                " for the rollout to fail (" + to_string(rho) + ", " + to_string(delta) +
                                ")-CCA; got p = " + to_string(p));
  }
  CreditingPredictor m = build_counterexample(p);
  CounterexampleResult out{p,
                           check_cca(m, Level::kNextToken, Rational(1), Rational(0)),
                           check_cca(m, Level::kRollout, rho, delta),
                           min_epsilon_cca(m, Level::kNextToken).overall,
                           min_epsilon_cca(m, Level::kRollout).overall,
                           {}};
  ConditionalPair pair = conditional_pair(m, Level::kRollout, DocSet::single(0), 0, "");
  out.directional_ratio = min_ratio(*pair.conditional, pair.counterfactual);
  return out;
}

struct RetrofitRow {
  std::string prompt;
  Rational solver_prob;
  Rational closed_form_prob;

  bool matches() const { return solver_prob == closed_form_prob; }
};

/// Every bit string of length <= ell, shortest first.
inline std::vector<std::string> bit_prompts(std::size_t ell) { return Alphabet("01").words_up_to(ell); }

/// Solver crediting probability against the closed form at each prompt.
inline std::vector<RetrofitRow> cmd_retrofit_opt(const HardFamily& family, std::vector<std::string> prompts = {}) {
  family.validate();
  if (prompts.empty()) prompts = bit_prompts(family.ell());
  OptimalAugmentation aug(build_hard_model(family), family.rho);
  std::vector<RetrofitRow> rows;
  for (const std::string& x : prompts) {
    if (x.size() > family.ell() + 1) throw std::invalid_argument("prompt '" + x + "' longer than ell + 1");
    rows.push_back({x, aug.at(x).solution.credit_probability(), closed_form_credit_prob(family.z, family.gamma, x)});
  }
  return rows;
}

struct FindZTrial {
  std::uint64_t seed = 0;
  std::string z;
  FindZResult result;
};

struct ScalingRow {
  std::size_t ell = 0;
  std::uint64_t findz_queries = 0;  ///< per trial; identical across trials
  std::uint64_t samples_per_estimate = 0;
  std::uint64_t bruteforce_worstcase = 0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  bool query_count_exact = true;  ///< every trial used exactly 2 ell N queries
  std::vector<FindZTrial> trial_log;

  Rational success_rate() const { return Rational(successes, std::max<std::size_t>(trials, 1)); }
  double ratio() const { return static_cast<double>(bruteforce_worstcase) / static_cast<double>(findz_queries); }
};

struct ScalingConfig {
  std::size_t ell_min = 4;
  std::size_t ell_max = 12;
  Rational gamma{1, 2};
  Rational alpha{0};
  Rational rho{1};
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  Perturbation perturbation = Perturbation::kRaisePrefixes;
  FindZParams estimator;
  unsigned threads = std::thread::hardware_concurrency();
};

/// FindZ over an (alpha-approximate) optimal-augmentation oracle against
/// the worst-case lexicographic prober on M_z, for each ell.
inline std::vector<ScalingRow> cmd_findz_scaling(const ScalingConfig& cfg) {
  if (cfg.ell_min == 0 || cfg.ell_min > cfg.ell_max) throw std::invalid_argument("bad ell range");
  if (cfg.trials == 0) throw std::invalid_argument("trials must be positive");
  std::vector<ScalingRow> rows;
  for (std::size_t ell = cfg.ell_min; ell <= cfg.ell_max; ++ell) {
    ScalingRow row;
    row.ell = ell;
    row.trials = cfg.trials;
    row.trial_log = parallel_trials<FindZTrial>(
        cfg.trials,
        [&](std::size_t i) {
          FindZTrial t;
          t.seed = trial_seed(cfg.seed, i);
          Rng rng(t.seed);
          t.z.resize(ell);
          for (char& c : t.z) c = (rng() & 1U) ? '1' : '0';
          HardFamily family{t.z, cfg.gamma, cfg.rho};
          CountingOracle oracle = cfg.alpha == 0 ? optimal_augmentation_oracle(family)
                                                 : alpha_approximate_oracle(family, cfg.alpha, cfg.perturbation);
          t.result = find_z(oracle, ell, cfg.gamma, cfg.alpha, rng, t.z, cfg.estimator);
          return t;
        },
        cfg.threads);
    row.samples_per_estimate = row.trial_log.front().result.samples_per_estimate;
    row.findz_queries = row.trial_log.front().result.queries_used;
    for (const auto& t : row.trial_log) {
      if (*t.result.success) ++row.successes;
      if (t.result.queries_used != 2 * ell * row.samples_per_estimate) row.query_count_exact = false;
      row.findz_queries = std::max(row.findz_queries, t.result.queries_used);
    }
    ProbeOracle prober(build_hard_model({std::string(ell, '1'), cfg.gamma, cfg.rho}));
    row.bruteforce_worstcase = brute_force_find_z(prober, ell).probes;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline bool scaling_passes(const std::vector<ScalingRow>& rows) {
  for (const auto& r : rows) {
    if (!r.query_count_exact || r.success_rate() < Rational(2, 3)) return false;
  }
  return true;
}

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "ell,findz_queries,bruteforce_worstcase,success_rate,success_rate_approx,samples_per_estimate,"
        "ratio_approx\n";
  for (const auto& r : rows) {
    os << r.ell << ',' << r.findz_queries << ',' << r.bruteforce_worstcase << ',' << to_string(r.success_rate())
       << ',' << to_double(r.success_rate()) << ',' << r.samples_per_estimate << ',' << r.ratio() << '\n';
  }
}

inline void write_trials_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "ell,trial,seed,z,recovered,success,queries\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.trial_log.size(); ++i) {
      const auto& t = r.trial_log[i];
      os << r.ell << ',' << i << ',' << t.seed << ',' << t.z << ',' << t.result.recovered << ','
         << (*t.result.success ? 1 : 0) << ',' << t.result.queries_used << '\n';
    }
  }
}

inline CcaReport cmd_verify(const CreditingPredictor& model, const Rational& rho, const Rational& delta, Level level) {
  return check_cca(model, level, rho, delta);
}

}  // namespace cca
