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

// Oracle access with query accounting: the sample/probability oracle over a
// crediting model, the Hoeffding estimator of a crediting probability, the
// bit-by-bit recovery of z from crediting probabilities, and the
// full-distribution prober that must search {0,1}^ell for z.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"
#include "cca/retrofit.hpp"

namespace cca {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical on every
/// platform, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF sampler over a fixed finite distribution.
template <class O>
class Sampler {
 public:
  explicit Sampler(const FiniteDist<O>& d) {
    Rational running = 0;
    for (const auto& [o, m] : d) {
      running += m;
      outcomes_.push_back(o);
      cdf_.push_back(to_double(running));
    }
    cdf_.back() = 1.0;
  }

  const O& operator()(Rng& rng) const {
    double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return outcomes_[std::min<std::size_t>(it - cdf_.begin(), outcomes_.size() - 1)];
  }

 private:
  std::vector<O> outcomes_;
  std::vector<double> cdf_;
};

enum class QueryKind { kSample, kProbability };

struct QueryRecord {
  QueryKind kind;
  DocSet dataset;
  std::string prompt;
};

/// Oracle over a crediting model given by its exact law. Answers sample
/// queries and probability queries and counts both. Single owner: not safe
/// to share between threads.
class CountingOracle {
 public:
  using Law = std::function<OutputDist(DocSet, std::string_view)>;

  explicit CountingOracle(Law law) : law_(std::move(law)) {}

  CreditedOutput sample(DocSet s, std::string_view x, Rng& rng) {
    ++sample_count_;
    if (logging_) log_.push_back({QueryKind::kSample, s, std::string(x)});
    return entry(s, x).sampler(rng);
  }

  Rational probability(DocSet s, std::string_view x, const CreditedOutput& o) {
    ++prob_count_;
    if (logging_) log_.push_back({QueryKind::kProbability, s, std::string(x)});
    return entry(s, x).dist.mass(o);
  }

  std::uint64_t sample_count() const { return sample_count_; }
  std::uint64_t prob_count() const { return prob_count_; }
  std::uint64_t total_queries() const { return sample_count_ + prob_count_; }

  void set_logging(bool on) { logging_ = on; }
  const std::vector<QueryRecord>& log() const { return log_; }

  /// The exact law, without counting a query. For tests and reports.
  const OutputDist& exact_law(DocSet s, std::string_view x) { return entry(s, x).dist; }

 private:
  struct Entry {
    OutputDist dist;
    Sampler<CreditedOutput> sampler;
  };

  const Entry& entry(DocSet s, std::string_view x) {
    auto key = std::make_pair(s, std::string(x));
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      OutputDist d = law_(s, x);
      Sampler<CreditedOutput> sampler(d);
      it = cache_.emplace(std::move(key), Entry{std::move(d), std::move(sampler)}).first;
    }
    return it->second;
  }

  Law law_;
  std::map<std::pair<DocSet, std::string>, Entry> cache_;
  std::uint64_t sample_count_ = 0;
  std::uint64_t prob_count_ = 0;
  bool logging_ = false;
  std::vector<QueryRecord> log_;
};

/// Oracle to the credit-optimal rho-CCA augmentation of the rollout of M_z.
inline CountingOracle optimal_augmentation_oracle(const HardFamily& family) {
  OptimalAugmentation aug(build_hard_model(family), family.rho);
  return CountingOracle([aug](DocSet s, std::string_view x) { return aug.law(s, x); });
}

/// How an alpha-approximate oracle departs from the optimum.
enum class Perturbation {
  /// Crediting probability raised by alpha on prefixes of z (clamped).
  kRaisePrefixes,
  /// Lowered by alpha on prefixes and raised by alpha elsewhere: the
  /// perturbation that shrinks the prefix/non-prefix gap the most.
  kAdversarial,
};

namespace detail {

// Mixes a law on {s1} toward always-credit (shift > 0) or never-credit
// (shift < 0) so that its crediting probability moves by `shift`, clamped
// to [0,1]. The string marginal is unchanged.
inline OutputDist shift_credit(const OutputDist& law, const Rational& shift) {
  const DocSet s1 = DocSet::single(0);
  Rational c = credit_probability(law, 0);
  Rational t = 0;
  bool toward_credit = shift > 0;
  if (toward_credit && c < 1) t = std::min<Rational>(shift / (1 - c), 1);
  if (!toward_credit && c > 0) t = std::min<Rational>(-shift / c, 1);
  std::map<CreditedOutput, Rational> out;
  for (const auto& [o, m] : law) {
    out[o] += (1 - t) * m;
    out[{o.value, toward_credit ? s1 : DocSet{}}] += t * m;
  }
  return OutputDist(std::move(out));
}

}  // namespace detail

/// Exact law of an additive alpha-approximation of the optimal
/// augmentation of M_z; alpha_approximate_oracle samples from it.
inline CreditingFamily alpha_approximate_family(const HardFamily& family, const Rational& alpha,
                                                Perturbation mode = Perturbation::kRaisePrefixes) {
  if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
  OptimalAugmentation aug(build_hard_model(family), family.rho);
  CreditingFamily out = aug.family();
  out.eval = [aug, family, alpha, mode](DocSet s, std::string_view x) {
    OutputDist law = aug.law(s, x);
    if (s.empty() || alpha == 0) return law;
    const bool prefix = is_prefix(x, family.z);
    if (mode == Perturbation::kRaisePrefixes) return prefix ? detail::shift_credit(law, alpha) : law;
    return detail::shift_credit(law, prefix ? Rational(-alpha) : alpha);
  };
  return out;
}

inline CountingOracle alpha_approximate_oracle(const HardFamily& family, const Rational& alpha,
                                               Perturbation mode = Perturbation::kRaisePrefixes) {
  return CountingOracle(alpha_approximate_family(family, alpha, mode).eval);
}

/// N = ceil(tau^-2 ln(2 / beta)) samples give additive error tau with
/// probability at least 1 - beta (Hoeffding).
inline std::uint64_t samples_needed(double tau, double beta) {
  if (!(tau > 0 && tau < 1) || !(beta > 0 && beta < 1)) {
    throw std::invalid_argument("tau and beta must lie in (0,1)");
  }
  return static_cast<std::uint64_t>(std::ceil(std::log(2.0 / beta) / (tau * tau)));
}

/// Empirical frequency of s1 ∈ C over N sample queries at (S, x).
inline double estimate_credit_probability(CountingOracle& oracle, DocSet s, std::string_view x, double tau,
                                          double beta, Rng& rng) {
  const std::uint64_t n = samples_needed(tau, beta);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (oracle.sample(s, x, rng).credit.contains(0)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct FindZStep {
  std::string prefix;  ///< recovered prefix before this step
  double c0 = 0;       ///< estimated crediting probability at prefix||0
  double c1 = 0;
};

struct FindZResult {
  std::string recovered;
  std::uint64_t queries_used = 0;
  std::uint64_t samples_per_estimate = 0;
  double tau = 0;
  double beta = 0;
  std::vector<FindZStep> steps;
  std::optional<bool> success;  ///< set when the true z was supplied
};

/// Tolerance used by find_z: a (1 - margin) fraction of (gamma - 2 alpha)/2.
inline double findz_tau(const Rational& gamma, const Rational& alpha, double margin = 1e-2) {
  return to_double(gamma - 2 * alpha) / 2 * (1 - margin);
}

/// Estimator settings. Unset tau and beta take the defaults
/// findz_tau(gamma, alpha, tau_margin) and 1/(6 ell).
struct FindZParams {
  double tau_margin = 1e-2;
  std::optional<double> tau;
  std::optional<double> beta;
};

/// Recovers z one bit at a time: the true next bit is the one whose
/// extension keeps a large crediting probability. Runs ell rounds so the
/// full z is output; each round makes two estimates.
inline FindZResult find_z(CountingOracle& oracle, std::size_t ell, const Rational& gamma, const Rational& alpha,
                          Rng& rng, std::optional<std::string> truth = std::nullopt, const FindZParams& params = {}) {
  if (ell == 0) throw std::invalid_argument("ell must be positive");
  if (2 * alpha >= gamma) throw std::invalid_argument("find_z requires alpha < gamma / 2");
  if (!(params.tau_margin > 0 && params.tau_margin < 1)) throw std::invalid_argument("tau margin must lie in (0,1)");
  FindZResult out;
  out.tau = params.tau.value_or(findz_tau(gamma, alpha, params.tau_margin));
  out.beta = params.beta.value_or(1.0 / (6.0 * static_cast<double>(ell)));
  if (!(out.tau > 0 && out.tau < 1)) throw std::invalid_argument("tau must lie in (0,1)");
  if (!(out.beta > 0 && out.beta < 1)) throw std::invalid_argument("beta must lie in (0,1)");
  out.samples_per_estimate = samples_needed(out.tau, out.beta);

  const DocSet s1 = DocSet::single(0);
  const std::uint64_t before = oracle.total_queries();
  for (std::size_t k = 0; k < ell; ++k) {
    FindZStep step;
    step.prefix = out.recovered;
    step.c0 = estimate_credit_probability(oracle, s1, out.recovered + '0', out.tau, out.beta, rng);
    step.c1 = estimate_credit_probability(oracle, s1, out.recovered + '1', out.tau, out.beta, rng);
    out.recovered += step.c0 > step.c1 ? '0' : '1';
    out.steps.push_back(step);
  }
  out.queries_used = oracle.total_queries() - before;
  if (truth) out.success = (*truth == out.recovered);
  return out;
}

/// Full-distribution access to a next-token predictor, counting probes.
class ProbeOracle {
 public:
  explicit ProbeOracle(CreditingPredictor model) : model_(std::move(model)) {}

  TokenDist probe(DocSet s, std::string_view x) {
    ++probes_;
    return model_.next(s, x);
  }
  std::uint64_t probes() const { return probes_; }

 private:
  CreditingPredictor model_;
  std::uint64_t probes_ = 0;
};

struct BruteForceResult {
  std::optional<std::string> z;
  std::uint64_t probes = 0;
};

/// Probes M_z({s1}, x) for x in lexicographic order over {0,1}^ell until
/// the next-token law differs from Bern(1/2).
inline BruteForceResult brute_force_find_z(ProbeOracle& oracle, std::size_t ell) {
  if (ell == 0 || ell >= 63) throw std::invalid_argument("ell out of range");
  const TokenDist fair{{{'0', {}}, Rational(1, 2)}, {{'1', {}}, Rational(1, 2)}};
  const std::uint64_t before = oracle.probes();
  BruteForceResult out;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << ell); ++code) {
    std::string x(ell, '0');
    for (std::size_t i = 0; i < ell; ++i) {
      if ((code >> (ell - 1 - i)) & 1U) x[i] = '1';
    }
    if (!(oracle.probe(DocSet::single(0), x) == fair)) {
      out.z = x;
      break;
    }
  }
  out.probes = oracle.probes() - before;
  return out;
}

}  // namespace cca
