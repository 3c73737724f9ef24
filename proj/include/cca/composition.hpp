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

// Lower bound on the CCA parameter of a crediting rollout in terms of the
// per-step non-crediting probabilities of its next-token predictor.
//
// For an output (x, C) with s_i ∉ C, the bound term is
//   ln( prod_j Pr[E_j | prefix] / Pr[s_i ∉ C] ) - k * ln(rho),
// where E_j is "step j does not credit s_i" under the full dataset S. Terms
// are kept as the exact ratio and the integer k; exp(term) = ratio / rho^k
// is exact, so comparisons never go through floating point.

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"
#include "cca/rollout.hpp"
#include "cca/verify.hpp"

namespace cca {

/// How many factors of rho the bound charges for an output.
enum class StepConvention {
  /// One per sampling round, the closing ⊥ round included. This is the
  /// count the chain-rule argument actually pays for and the only sound
  /// choice when rho > 1.
  kAllRounds,
  /// One per generated non-⊥ token. Agrees with kAllRounds at rho = 1.
  kGeneratedTokens,
};

struct CompositionTerm {
  std::string output;
  DocSet credit;
  Rational step_product;  ///< prod_j Pr[E_j | prefix], over every round
  Rational ratio;         ///< step_product / Pr[s_i ∉ C]
  unsigned steps = 0;     ///< generated non-⊥ tokens
  unsigned rounds = 0;    ///< sampling rounds, = steps + 1

  unsigned charged(StepConvention c) const { return c == StepConvention::kAllRounds ? rounds : steps; }
};

struct CompositionBound {
  bool always_credits = false;
  Rational rho = 1;
  StepConvention convention = StepConvention::kAllRounds;
  Rational not_credited_prob = 0;  ///< Pr[s_i ∉ C] under the rollout
  std::vector<CompositionTerm> terms;

  /// exp(term) for one output.
  Rational term_exp(const CompositionTerm& t) const { return t.ratio / pow(rho, t.charged(convention)); }

  /// Index of the maximizing term; nullopt when always_credits.
  std::optional<std::size_t> argmax() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (!best || term_exp(terms[i]) > term_exp(terms[*best])) best = i;
    }
    return best;
  }
  /// exp(bound): every rho' the rollout is rho'-CCA at must be at least this.
  Rational bound_exp() const {
    auto i = argmax();
    if (!i) throw std::logic_error("no bound when s_i is always credited");
    return term_exp(terms[*i]);
  }
  double bound() const { return std::log(to_double(bound_exp())); }
};

inline CompositionBound composition_lower_bound(const CreditingPredictor& m, DocSet dataset, std::size_t doc,
                                                std::string_view x0, const Rational& rho,
                                                StepConvention convention = StepConvention::kAllRounds) {
  if (!dataset.contains(doc)) throw std::invalid_argument("document not in dataset");
  if (rho < 1) throw std::domain_error("rho must be >= 1");
  CompositionBound out;
  out.rho = rho;
  out.convention = convention;

  OutputDist rollout = crediting_rollout_distribution(m, dataset, x0);
  auto not_credited = [doc](const CreditedOutput& o) { return !o.credit.contains(doc); };
  out.not_credited_prob = rollout.probability(not_credited);
  if (out.not_credited_prob == 0) {
    out.always_credits = true;
    return out;
  }

  auto step_ok = [&](std::string_view prefix) {
    return m.next(dataset, prefix).probability([doc](const TokenCredit& tc) { return !tc.credit.contains(doc); });
  };
  for (const auto& [o, mass] : rollout) {
    if (!not_credited(o)) continue;
    CompositionTerm t;
    t.output = o.value;
    t.credit = o.credit;
    t.steps = static_cast<unsigned>(o.value.size() - x0.size());
    t.rounds = t.steps + 1;
    t.step_product = 1;
    for (std::size_t len = x0.size(); len <= o.value.size(); ++len) {
      t.step_product *= step_ok(std::string_view(o.value).substr(0, len));
    }
    t.ratio = t.step_product / out.not_credited_prob;
    out.terms.push_back(std::move(t));
  }
  return out;
}

enum class CompositionStatus { kHolds, kViolated, kPreconditionFailed };

struct CompositionCheck {
  CompositionStatus status = CompositionStatus::kHolds;
  std::size_t triples_checked = 0;
  /// Set when violated: the triple whose bound exceeds rho'.
  std::optional<std::string> prompt;
  DocSet dataset;
  std::size_t doc = 0;
  std::optional<CompositionBound> bound;

  bool holds() const { return status == CompositionStatus::kHolds; }
};

/// Checks that rho' dominates the composition bound on every (S, s_i, x0),
/// given that the predictor is rho-CCA at delta = 0.
inline CompositionCheck verify_composition(const CreditingPredictor& m, const Rational& rho,
                                     const ExtendedRational& rho_prime,
                                     StepConvention convention = StepConvention::kAllRounds) {
  CompositionCheck out;
  if (!check_cca(m, Level::kNextToken, rho, Rational(0)).overall) {
    out.status = CompositionStatus::kPreconditionFailed;
    return out;
  }
  for (const std::string& x : m.prompts()) {
    for (DocSet s : m.universe().datasets()) {
      for (std::size_t doc : m.universe().members(s)) {
        CompositionBound b = composition_lower_bound(m, s, doc, x, rho, convention);
        ++out.triples_checked;
        if (b.always_credits || rho_prime.is_infinite()) continue;
        if (b.bound_exp() > rho_prime.value()) {
          out.status = CompositionStatus::kViolated;
          out.prompt = x;
          out.dataset = s;
          out.doc = doc;
          out.bound = std::move(b);
          return out;
        }
      }
    }
  }
  return out;
}

/// Boolean form under its established name.
inline bool verify_theorem4(const CreditingPredictor& m, const Rational& rho, const ExtendedRational& rho_prime) {
  return verify_composition(m, rho, rho_prime).holds();
}

}  // namespace cca
