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

// Exact rollout distributions by depth-first enumeration of the generation
// tree. Outputs carry the prompt as a prefix and drop the trailing ⊥; the
// credit set of the ⊥-emitting round still joins the union.

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"

namespace cca {

/// A full rollout trace w = ((x_1, C'_1), ..., (⊥, C'_n)).
struct Trace {
  std::vector<TokenCredit> steps;

  /// Concatenated non-end tokens.
  std::string tokens() const {
    std::string out;
    for (const auto& s : steps) {
      if (s.value != kEnd) out += s.value;
    }
    return out;
  }
  DocSet credit_union() const {
    DocSet u;
    for (const auto& s : steps) u = u | s.credit;
    return u;
  }

  friend auto operator<=>(const Trace&, const Trace&) = default;
  friend bool operator==(const Trace&, const Trace&) = default;
};

namespace detail {

inline void check_prompt(const CreditingPredictor& m, std::string_view x0) {
  if (!contains_end(x0) && x0.size() > m.horizon()) {
    throw std::invalid_argument("prompt '" + display(x0) + "' longer than horizon");
  }
}

inline std::string strip_trailing_end(std::string_view x) {
  while (!x.empty() && x.back() == kEnd) x.remove_suffix(1);
  return std::string(x);
}

// Walks prompts once each, carrying the distribution of the credit union
// accumulated so far.
inline void crediting_rollout_visit(const CreditingPredictor& m, DocSet s, const std::string& prompt,
                                    const std::map<DocSet, Rational>& unions,
                                    std::map<CreditedOutput, Rational>& out) {
  std::map<char, std::map<DocSet, Rational>> children;
  for (const auto& [tc, mass] : m.next(s, prompt)) {
    for (const auto& [u, w] : unions) {
      if (tc.value == kEnd) {
        out[{prompt, u | tc.credit}] += w * mass;
      } else {
        children[tc.value][u | tc.credit] += w * mass;
      }
    }
  }
  for (const auto& [token, next_unions] : children) {
    if (prompt.size() >= m.horizon()) throw NonTerminatingModel(prompt);
    crediting_rollout_visit(m, s, prompt + token, next_unions, out);
  }
}

inline void rollout_visit(const CreditingPredictor& m, DocSet s, const std::string& prompt,
                          const Rational& weight, std::map<std::string, Rational>& out) {
  for (const auto& [tc, mass] : m.next(s, prompt)) {
    if (tc.value == kEnd) {
      out[prompt] += weight * mass;
    } else {
      if (prompt.size() >= m.horizon()) throw NonTerminatingModel(prompt);
      rollout_visit(m, s, prompt + tc.value, weight * mass, out);
    }
  }
}

inline void trace_visit(const CreditingPredictor& m, DocSet s, const std::string& prompt,
                        std::vector<TokenCredit>& steps, const Rational& weight,
                        std::map<Trace, Rational>& out) {
  for (const auto& [tc, mass] : m.next(s, prompt)) {
    steps.push_back(tc);
    if (tc.value == kEnd) {
      out[Trace{steps}] += weight * mass;
    } else {
      if (prompt.size() >= m.horizon()) throw NonTerminatingModel(prompt);
      trace_visit(m, s, prompt + tc.value, steps, weight * mass, out);
    }
    steps.pop_back();
  }
}

}  // namespace detail

/// Exact distribution of the crediting rollout G~(S, x0) over
/// (output string, union of per-step credit sets).
inline OutputDist crediting_rollout_distribution(const CreditingPredictor& m, DocSet s,
                                                 std::string_view x0) {
  detail::check_prompt(m, x0);
  if (contains_end(x0)) return OutputDist::point({detail::strip_trailing_end(x0), DocSet{}});
  std::map<CreditedOutput, Rational> out;
  detail::crediting_rollout_visit(m, s, std::string(x0), {{DocSet{}, Rational(1)}}, out);
  return OutputDist(std::move(out));
}

/// Exact distribution of the plain rollout G(S, x0), ignoring credits.
inline FiniteDist<std::string> rollout_distribution(const CreditingPredictor& m, DocSet s,
                                                    std::string_view x0) {
  detail::check_prompt(m, x0);
  if (contains_end(x0)) return FiniteDist<std::string>::point(detail::strip_trailing_end(x0));
  std::map<std::string, Rational> out;
  detail::rollout_visit(m, s, std::string(x0), Rational(1), out);
  return FiniteDist<std::string>(std::move(out));
}

/// Exact distribution over full traces, without collapsing credit sets.
inline FiniteDist<Trace> trace_distribution(const CreditingPredictor& m, DocSet s, std::string_view x0) {
  detail::check_prompt(m, x0);
  if (contains_end(x0)) return FiniteDist<Trace>::point(Trace{{{kEnd, DocSet{}}}});
  std::map<Trace, Rational> out;
  std::vector<TokenCredit> steps;
  detail::trace_visit(m, s, std::string(x0), steps, Rational(1), out);
  return FiniteDist<Trace>(std::move(out));
}

/// String marginal of a crediting output distribution.
inline FiniteDist<std::string> output_marginal(const OutputDist& d) {
  return d.map([](const CreditedOutput& o) { return o.value; });
}

}  // namespace cca
