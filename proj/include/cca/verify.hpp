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

// Deciding counterfactual credit attribution for exactly represented
// crediting models, plus the augmentation and alpha-approximation checks.

#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"
#include "cca/rollout.hpp"

namespace cca {

/// A crediting model given by its exact output law on every (dataset,
/// prompt), together with the finite prompt set the checks quantify over.
/// Prompts outside `prompts` are assumed to behave as the (⊥, ∅) point mass.
struct CreditingFamily {
  DataUniverse universe;
  std::vector<std::string> prompts;
  std::function<OutputDist(DocSet, std::string_view)> eval;
};

/// A non-crediting model: dataset and prompt to a law over output strings.
using BaseModel = std::function<FiniteDist<std::string>(DocSet, std::string_view)>;

enum class Level { kNextToken, kRollout };

inline const char* to_string(Level level) {
  return level == Level::kNextToken ? "next-token" : "rollout";
}

/// The next-token predictor itself viewed as a crediting algorithm. Tokens
/// become one-character outputs ("$" for ⊥).
inline CreditingFamily next_token_family(const CreditingPredictor& m) {
  return {m.universe(), m.prompts(), [m](DocSet s, std::string_view x) {
            return m.next(s, x).map(
                [](const TokenCredit& tc) { return CreditedOutput{std::string(1, tc.value), tc.credit}; });
          }};
}

inline CreditingFamily rollout_family(const CreditingPredictor& m) {
  return {m.universe(), m.prompts(),
          [m](DocSet s, std::string_view x) { return crediting_rollout_distribution(m, s, x); }};
}

inline CreditingFamily family_at(const CreditingPredictor& m, Level level) {
  return level == Level::kNextToken ? next_token_family(m) : rollout_family(m);
}

inline BaseModel base_rollout(const CreditingPredictor& m) {
  return [m](DocSet s, std::string_view x) { return rollout_distribution(m, s, x); };
}

/// The two distributions compared by the CCA definition for one document:
/// the output law on S conditioned on s_i not being credited, and the
/// output law on S without s_i.
struct ConditionalPair {
  std::optional<OutputDist> conditional;  ///< empty iff s_i is always credited
  OutputDist counterfactual;
  Rational credit_prob;

  bool always_credits() const { return credit_prob == 1; }
};

inline ConditionalPair conditional_pair(const OutputDist& on_dataset, const OutputDist& without_doc,
                                        std::size_t doc) {
  auto not_credited = [doc](const CreditedOutput& o) { return !o.credit.contains(doc); };
  Rational credit_prob = 1 - on_dataset.probability(not_credited);
  std::optional<OutputDist> conditional;
  if (credit_prob != 1) conditional = on_dataset.conditioned(not_credited);
  return {std::move(conditional), without_doc, std::move(credit_prob)};
}

inline ConditionalPair conditional_pair(const CreditingFamily& family, DocSet dataset, std::size_t doc,
                                        std::string_view prompt) {
  if (!dataset.contains(doc)) throw std::invalid_argument("document not in dataset");
  return conditional_pair(family.eval(dataset, prompt), family.eval(dataset.without(doc), prompt), doc);
}

inline ConditionalPair conditional_pair(const CreditingPredictor& m, Level level, DocSet dataset,
                                        std::size_t doc, std::string_view prompt) {
  return conditional_pair(family_at(m, level), dataset, doc, prompt);
}

enum class TripleStatus { kAlwaysCredits, kClose, kViolated };

inline const char* to_string(TripleStatus s) {
  switch (s) {
    case TripleStatus::kAlwaysCredits: return "always-credits";
    case TripleStatus::kClose: return "close";
    case TripleStatus::kViolated: return "violated";
  }
  return "?";
}

/// Verdict for one (prompt, dataset, document) triple.
struct TripleVerdict {
  std::string prompt;
  DocSet dataset;
  std::size_t doc = 0;
  TripleStatus status = TripleStatus::kClose;
  Rational credit_prob;
  ClosenessVerdict<CreditedOutput> closeness;  ///< meaningful unless always-credits
  ExtendedRational conditional_over_counterfactual;  ///< min_ratio(cond, cf)
  ExtendedRational counterfactual_over_conditional;  ///< min_ratio(cf, cond)

  /// Least rho for which this triple passes at delta = 0.
  ExtendedRational min_rho() const {
    if (status == TripleStatus::kAlwaysCredits) return ExtendedRational(1);
    return max(conditional_over_counterfactual, counterfactual_over_conditional);
  }
};

struct CcaReport {
  Rational rho;
  Rational delta;
  std::vector<TripleVerdict> triples;
  bool overall = true;

  const TripleVerdict* first_violation() const {
    for (const auto& t : triples) {
      if (t.status == TripleStatus::kViolated) return &t;
    }
    return nullptr;
  }
  ExtendedRational max_min_rho() const {
    ExtendedRational out(1);
    for (const auto& t : triples) out = max(out, t.min_rho());
    return out;
  }
};

/// Applies the CCA definition to every prompt of the family, every dataset
/// and every document in it.
inline CcaReport check_cca(const CreditingFamily& family, const Rational& rho, const Rational& delta) {
  CcaReport report{rho, delta, {}, true};
  for (const std::string& x : family.prompts) {
    std::vector<std::optional<OutputDist>> laws(family.universe.all().bits() + 1);
    auto law = [&](DocSet s) -> const OutputDist& {
      auto& slot = laws[s.bits()];
      if (!slot) slot = family.eval(s, x);
      return *slot;
    };
    for (DocSet s : family.universe.datasets()) {
      for (std::size_t doc : family.universe.members(s)) {
        ConditionalPair pair = conditional_pair(law(s), law(s.without(doc)), doc);
        TripleVerdict v;
        v.prompt = x;
        v.dataset = s;
        v.doc = doc;
        v.credit_prob = pair.credit_prob;
        if (pair.always_credits()) {
          v.status = TripleStatus::kAlwaysCredits;
        } else {
          v.closeness = ratio_close(*pair.conditional, pair.counterfactual, rho, delta);
          v.status = v.closeness.close ? TripleStatus::kClose : TripleStatus::kViolated;
          v.conditional_over_counterfactual = min_ratio(*pair.conditional, pair.counterfactual);
          v.counterfactual_over_conditional = min_ratio(pair.counterfactual, *pair.conditional);
        }
        if (v.status == TripleStatus::kViolated) report.overall = false;
        report.triples.push_back(std::move(v));
      }
    }
  }
  return report;
}

inline CcaReport check_cca(const CreditingPredictor& m, Level level, const Rational& rho,
                           const Rational& delta) {
  return check_cca(family_at(m, level), rho, delta);
}

/// Smallest rho per triple at delta = 0 and the overall maximum. Infinity
/// means a support mismatch: not rho-CCA for any finite rho.
struct MinEpsilonReport {
  std::vector<TripleVerdict> triples;
  ExtendedRational overall;

  double epsilon() const { return overall.log(); }
};

inline MinEpsilonReport min_epsilon_cca(const CreditingFamily& family) {
  CcaReport r = check_cca(family, Rational(1), Rational(0));
  ExtendedRational overall = r.max_min_rho();
  return {std::move(r.triples), std::move(overall)};
}

inline MinEpsilonReport min_epsilon_cca(const CreditingPredictor& m, Level level) {
  return min_epsilon_cca(family_at(m, level));
}

struct AugmentationVerdict {
  bool augments = true;
  std::optional<std::pair<DocSet, std::string>> mismatch;

  explicit operator bool() const { return augments; }
};

/// True iff the string marginal of the crediting model equals the base
/// model on every dataset and prompt of the family.
inline AugmentationVerdict check_augmentation(const CreditingFamily& crediting, const BaseModel& base) {
  for (const std::string& x : crediting.prompts) {
    for (DocSet s : crediting.universe.datasets()) {
      if (!(output_marginal(crediting.eval(s, x)) == base(s, x))) {
        return {false, std::make_pair(s, x)};
      }
    }
  }
  return {};
}

struct AlphaApproxVerdict {
  bool within = true;
  Rational worst_gap = 0;
  std::optional<std::string> worst_prompt;
  DocSet worst_dataset;
  std::size_t worst_doc = 0;

  explicit operator bool() const { return within; }
};

inline Rational credit_probability(const OutputDist& d, std::size_t doc) {
  return d.probability([doc](const CreditedOutput& o) { return o.credit.contains(doc); });
}

/// Additive alpha-approximation: crediting probabilities of every document
/// differ by at most alpha on every dataset and prompt.
inline AlphaApproxVerdict check_alpha_approx(const CreditingFamily& candidate,
                                             const CreditingFamily& reference, const Rational& alpha) {
  if (!(candidate.universe == reference.universe)) throw std::invalid_argument("universes differ");
  AlphaApproxVerdict out;
  for (const std::string& x : reference.prompts) {
    for (DocSet s : reference.universe.datasets()) {
      if (s.empty()) continue;
      OutputDist c = candidate.eval(s, x);
      OutputDist r = reference.eval(s, x);
      for (std::size_t doc : reference.universe.members(s)) {
        Rational gap = abs(credit_probability(c, doc) - credit_probability(r, doc));
        if (!out.worst_prompt || gap > out.worst_gap) {
          out.worst_gap = gap;
          out.worst_prompt = x;
          out.worst_dataset = s;
          out.worst_doc = doc;
        }
      }
    }
  }
  out.within = out.worst_gap <= alpha;
  return out;
}

}  // namespace cca
