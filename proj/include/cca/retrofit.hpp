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

// Credit-optimal CCA augmentation of a non-crediting model over the
// singleton universe {s1}.
//
// For a fixed prompt, with p_y = G({s1}, x)(y) and q_y = G(∅, x)(y), an
// augmentation is fixed by r_y = Pr[s1 not credited | output y]. It is
// rho-CCA iff, with R = sum_y r_y p_y,
//     q_y R / rho <= r_y p_y <= rho q_y R   and   0 <= r_y <= 1,
// and the optimal one maximizes R (minimizes the crediting probability).

#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"
#include "cca/rollout.hpp"
#include "cca/verify.hpp"

namespace cca {

/// (p_y, q_y) over the union of both supports, outputs in lexicographic order.
struct OutputMargins {
  std::vector<std::string> outputs;
  std::vector<Rational> p;  ///< law with s1 present
  std::vector<Rational> q;  ///< law with s1 removed

  std::size_t size() const { return outputs.size(); }

  void validate() const {
    if (p.size() != outputs.size() || q.size() != outputs.size()) {
      throw std::invalid_argument("margin vectors have mismatched lengths");
    }
    Rational sp = 0;
    Rational sq = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (p[i] < 0 || q[i] < 0) throw std::invalid_argument("negative margin");
      sp += p[i];
      sq += q[i];
      if (i > 0 && !(outputs[i - 1] < outputs[i])) throw std::invalid_argument("outputs not strictly sorted");
    }
    if (sp != 1 || sq != 1) throw std::invalid_argument("margins are not normalized");
  }
};

inline OutputMargins make_margins(const FiniteDist<std::string>& p, const FiniteDist<std::string>& q) {
  OutputMargins m;
  for (const std::string& y : joint_support(p, q)) {
    m.outputs.push_back(y);
    m.p.push_back(p.mass(y));
    m.q.push_back(q.mass(y));
  }
  return m;
}

/// Exact (p, q) of the base predictor's rollout at prompt x.
inline OutputMargins output_margins(const CreditingPredictor& base, std::string_view x) {
  if (base.universe().size() != 1) throw std::invalid_argument("output margins need a singleton universe");
  return make_margins(rollout_distribution(base, DocSet::single(0), x), rollout_distribution(base, DocSet{}, x));
}

struct AugmentationSolution {
  Rational R_star;                       ///< optimal probability of not crediting
  std::map<std::string, Rational> r;     ///< Pr[not credit | y]
  std::set<std::string> always_credit_outputs;  ///< outputs with q_y = 0 < p_y

  Rational credit_probability() const { return 1 - R_star; }
};

namespace detail {

// U(R) - R where U(R) = sum_y min(rho q_y R, p_y).
inline Rational water_gap(const OutputMargins& m, const Rational& rho, const Rational& big_r) {
  Rational u = 0;
  for (std::size_t i = 0; i < m.size(); ++i) u += std::min<Rational>(rho * m.q[i] * big_r, m.p[i]);
  return u - big_r;
}

}  // namespace detail

/// Solves the augmentation LP exactly.
///
/// R is feasible iff R <= Rbar = rho * min_{q_y > 0} p_y / q_y (so every
/// lower bound fits under r_y <= 1) and R <= U(R). U is concave and
/// piecewise linear with breakpoints p_y / (rho q_y), so the largest such
/// R is found by scanning the sorted breakpoints. The r_y start at their
/// lower bounds and are raised toward min(rho q_y R / p_y, 1) in output
/// order until sum r_y p_y = R*.
inline AugmentationSolution solve_optimal_augmentation(const OutputMargins& m, const Rational& rho) {
  m.validate();
  if (rho < 1) throw std::domain_error("rho must be >= 1");

  Rational cap = 1;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.q[i] > 0) cap = std::min<Rational>(cap, rho * m.p[i] / m.q[i]);
  }

  std::vector<Rational> points{Rational(0)};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.q[i] > 0) {
      Rational b = m.p[i] / (rho * m.q[i]);
      if (b > 0 && b < cap) points.push_back(b);
    }
  }
  points.push_back(cap);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  // The feasible set {R >= 0 : U(R) >= R} is an interval starting at 0.
  Rational r_star = 0;
  Rational gap_lo = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const Rational& lo = points[k - 1];
    const Rational& hi = points[k];
    Rational gap_hi = detail::water_gap(m, rho, hi);
    if (gap_hi >= 0) {
      r_star = hi;
      gap_lo = gap_hi;
      continue;
    }
    if (gap_lo > 0) r_star = lo + gap_lo * (hi - lo) / (gap_lo - gap_hi);
    break;
  }

  AugmentationSolution sol;
  sol.R_star = r_star;
  Rational total = 0;
  std::vector<Rational> upper(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string& y = m.outputs[i];
    if (m.q[i] == 0 && m.p[i] > 0) sol.always_credit_outputs.insert(y);
    if (m.p[i] == 0) {
      sol.r[y] = 0;
      continue;
    }
    Rational lower = m.q[i] * r_star / (rho * m.p[i]);
    upper[i] = std::min<Rational>(rho * m.q[i] * r_star / m.p[i], 1);
    sol.r[y] = lower;
    total += lower * m.p[i];
  }
  Rational deficit = r_star - total;
  for (std::size_t i = 0; i < m.size() && deficit > 0; ++i) {
    if (m.p[i] == 0) continue;
    Rational& r = sol.r[m.outputs[i]];
    Rational room = (upper[i] - r) * m.p[i];
    Rational add = std::min(room, deficit);
    r += add / m.p[i];
    deficit -= add;
  }
  if (deficit != 0) throw std::logic_error("water-filling did not reach R*");
  return sol;
}

/// Checks the LP constraints exactly; returns a description of the first
/// violated one.
inline std::optional<std::string> lp_violation(const OutputMargins& m, const Rational& rho,
                                               const AugmentationSolution& sol) {
  Rational total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string& y = m.outputs[i];
    auto it = sol.r.find(y);
    if (it == sol.r.end()) return "missing r for '" + y + "'";
    const Rational& r = it->second;
    if (r < 0 || r > 1) return "r outside [0,1] at '" + y + "'";
    Rational mass = r * m.p[i];
    if (m.q[i] * sol.R_star > rho * mass) return "lower CCA bound fails at '" + y + "'";
    if (mass > rho * m.q[i] * sol.R_star) return "upper CCA bound fails at '" + y + "'";
    total += mass;
  }
  if (total != sol.R_star) return "R does not equal sum r_y p_y";
  return std::nullopt;
}

/// Joint law on {s1}: (y, ∅) with mass r_y p_y and (y, {s1}) with the rest.
inline OutputDist augmented_law(const OutputMargins& m, const AugmentationSolution& sol) {
  std::map<CreditedOutput, Rational> joint;
  const DocSet s1 = DocSet::single(0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Rational& r = sol.r.at(m.outputs[i]);
    joint[{m.outputs[i], DocSet{}}] += r * m.p[i];
    joint[{m.outputs[i], s1}] += (1 - r) * m.p[i];
  }
  return OutputDist(std::move(joint));
}

/// Credit-free law on ∅ built from the q margins.
inline OutputDist counterfactual_law(const OutputMargins& m) {
  std::map<CreditedOutput, Rational> law;
  for (std::size_t i = 0; i < m.size(); ++i) law[{m.outputs[i], DocSet{}}] += m.q[i];
  return OutputDist(std::move(law));
}

/// Pr[optimal augmentation of G_z credits s1 at x]: gamma on prefixes of z,
/// zero elsewhere.
inline Rational closed_form_credit_prob(std::string_view z, const Rational& gamma, std::string_view x) {
  return is_prefix(x, z) ? gamma : Rational(0);
}

/// The credit-optimal augmentation of a base model's rollout, solved per
/// prompt on demand and cached. The base must have the universe {s1}.
class OptimalAugmentation {
 public:
  OptimalAugmentation(CreditingPredictor base, Rational rho)
      : state_(std::make_shared<State>(State{std::move(base), std::move(rho), {}})) {
    if (state_->base.universe().size() != 1) throw std::invalid_argument("augmentation needs universe {s1}");
  }

  struct Solved {
    OutputMargins margins;
    AugmentationSolution solution;
  };

  const Solved& at(std::string_view x) const {
    auto it = state_->cache.find(std::string(x));
    if (it == state_->cache.end()) {
      OutputMargins m = output_margins(state_->base, x);
      AugmentationSolution sol = solve_optimal_augmentation(m, state_->rho);
      it = state_->cache.emplace(std::string(x), Solved{std::move(m), std::move(sol)}).first;
    }
    return it->second;
  }

  OutputDist law(DocSet s, std::string_view x) const {
    const Solved& solved = at(x);
    return s.empty() ? counterfactual_law(solved.margins) : augmented_law(solved.margins, solved.solution);
  }

  CreditingFamily family() const {
    auto state = state_;
    OptimalAugmentation self = *this;
    return {state->base.universe(), state->base.prompts(),
            [self](DocSet s, std::string_view x) { return self.law(s, x); }};
  }

  const CreditingPredictor& base() const { return state_->base; }
  const Rational& rho() const { return state_->rho; }

 private:
  struct State {
    CreditingPredictor base;
    Rational rho;
    std::map<std::string, Solved> cache;
  };
  std::shared_ptr<State> state_;
};

}  // namespace cca
