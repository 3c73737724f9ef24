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

// Exact finite probability distributions and (epsilon, delta)-closeness.
//
// Epsilon never appears as a real number here: every check takes
// rho = e^epsilon as an exact Rational.

#pragma once

#include <algorithm>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cca/rational.hpp"

namespace cca {

/// A probability distribution over a finite set of outcomes of type O, with
/// exact rational masses. Zero-mass outcomes are pruned, so the stored
/// entries are exactly the support. O must be totally ordered.
template <class O>
class FiniteDist {
 public:
  using Outcome = O;
  using Map = std::map<O, Rational>;

  FiniteDist() = delete;

  /// Duplicate outcomes are merged by adding their masses.
  explicit FiniteDist(const std::vector<std::pair<O, Rational>>& entries) {
    for (const auto& [o, m] : entries) {
      if (m < 0 || m > 1) throw std::invalid_argument("mass outside [0,1]: " + to_string(m));
      masses_[o] += m;
    }
    finish();
  }
  FiniteDist(std::initializer_list<std::pair<O, Rational>> entries)
      : FiniteDist(std::vector<std::pair<O, Rational>>(entries)) {}
  explicit FiniteDist(Map masses) : masses_(std::move(masses)) {
    for (const auto& [o, m] : masses_) {
      if (m < 0 || m > 1) throw std::invalid_argument("mass outside [0,1]: " + to_string(m));
    }
    finish();
  }

  static FiniteDist point(O outcome) { return FiniteDist(Map{{std::move(outcome), Rational(1)}}); }

  /// Normalizes nonnegative weights with a positive total.
  static FiniteDist normalized(Map weights) {
    Rational total = 0;
    for (const auto& [o, w] : weights) {
      if (w < 0) throw std::invalid_argument("negative weight");
      total += w;
    }
    if (total == 0) throw std::invalid_argument("cannot normalize zero total weight");
    for (auto& [o, w] : weights) w /= total;
    return FiniteDist(std::move(weights));
  }

  Rational mass(const O& o) const {
    auto it = masses_.find(o);
    return it == masses_.end() ? Rational(0) : it->second;
  }

  /// Probability of the event {o : pred(o)}.
  template <class Pred>
  Rational probability(Pred&& pred) const {
    Rational total = 0;
    for (const auto& [o, m] : masses_) {
      if (pred(o)) total += m;
    }
    return total;
  }

  bool contains(const O& o) const { return masses_.count(o) != 0; }
  std::size_t size() const { return masses_.size(); }
  const Map& entries() const { return masses_; }
  auto begin() const { return masses_.begin(); }
  auto end() const { return masses_.end(); }

  std::vector<O> support() const {
    std::vector<O> out;
    out.reserve(masses_.size());
    for (const auto& [o, m] : masses_) out.push_back(o);
    return out;
  }

  /// Pushforward through f (e.g. marginalizing a coordinate away).
  template <class F>
  auto map(F&& f) const -> FiniteDist<std::decay_t<std::invoke_result_t<F, const O&>>> {
    using T = std::decay_t<std::invoke_result_t<F, const O&>>;
    typename FiniteDist<T>::Map out;
    for (const auto& [o, m] : masses_) out[f(o)] += m;
    return FiniteDist<T>(std::move(out));
  }

  /// Conditions on {o : pred(o)}; nullopt if that event has probability zero.
  template <class Pred>
  std::optional<FiniteDist> conditioned(Pred&& pred) const {
    Map kept;
    for (const auto& [o, m] : masses_) {
      if (pred(o)) kept.emplace(o, m);
    }
    if (kept.empty()) return std::nullopt;
    return normalized(std::move(kept));
  }

  friend bool operator==(const FiniteDist& a, const FiniteDist& b) { return a.masses_ == b.masses_; }

 private:
  void finish() {
    Rational total = 0;
    for (auto it = masses_.begin(); it != masses_.end();) {
      total += it->second;
      it = it->second == 0 ? masses_.erase(it) : std::next(it);
    }
    if (total != 1) throw std::invalid_argument("masses sum to " + to_string(total) + ", not 1");
  }

  Map masses_;
};

/// Union of two supports, in outcome order.
template <class O>
std::vector<O> joint_support(const FiniteDist<O>& p, const FiniteDist<O>& q) {
  std::vector<O> out;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      out.push_back((a++)->first);
    } else if (a == p.end() || b->first < a->first) {
      out.push_back((b++)->first);
    } else {
      out.push_back(a->first);
      ++a;
      ++b;
    }
  }
  return out;
}

enum class Direction {
  kNone,     ///< both inequalities hold
  kPOverQ,   ///< P(E) <= rho Q(E) + delta fails
  kQOverP,   ///< Q(E) <= rho P(E) + delta fails
};

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::kNone: return "none";
    case Direction::kPOverQ: return "P<=rho*Q+delta";
    case Direction::kQOverP: return "Q<=rho*P+delta";
  }
  return "?";
}

/// The event maximizing P(E) - rho * Q(E), and that maximum.
template <class O>
struct TightEvent {
  std::vector<O> event;
  Rational excess;  // P(E) - rho Q(E) >= 0
};

template <class O>
TightEvent<O> tight_event(const FiniteDist<O>& p, const FiniteDist<O>& q, const Rational& rho) {
  TightEvent<O> out{{}, 0};
  for (const auto& [o, pm] : p) {
    Rational gap = pm - rho * q.mass(o);
    if (gap > 0) {
      out.event.push_back(o);
      out.excess += gap;
    }
  }
  return out;
}

template <class O>
struct ClosenessVerdict {
  bool close = true;
  std::optional<std::vector<O>> witness_event;
  Direction direction = Direction::kNone;
  /// max_E P(E) - rho Q(E) - delta in the reported direction (or the mirror
  /// for kQOverP); when close, the larger of the two, which is <= 0.
  Rational slack = 0;
};

/// Decides P ~(rho, delta) Q: for all events E, P(E) <= rho Q(E) + delta and
/// Q(E) <= rho P(E) + delta. Only the two tight events need checking.
template <class O>
ClosenessVerdict<O> ratio_close(const FiniteDist<O>& p, const FiniteDist<O>& q, const Rational& rho,
                                const Rational& delta) {
  if (rho < 1) throw std::domain_error("rho must be >= 1");
  if (delta < 0 || delta > 1) throw std::domain_error("delta must lie in [0,1]");
  TightEvent<O> plus = tight_event(p, q, rho);
  TightEvent<O> minus = tight_event(q, p, rho);
  Rational plus_slack = plus.excess - delta;
  Rational minus_slack = minus.excess - delta;

  // When both directions fail, E+ is the reported witness.
  ClosenessVerdict<O> v;
  if (plus_slack > 0) {
    v = {false, std::move(plus.event), Direction::kPOverQ, plus_slack};
  } else if (minus_slack > 0) {
    v = {false, std::move(minus.event), Direction::kQOverP, minus_slack};
  } else {
    v.slack = std::max(plus_slack, minus_slack);
  }
  return v;
}

/// max over o with P(o) > 0 of P(o)/Q(o); infinite if Q misses part of
/// P's support. This is the least rho with P(E) <= rho Q(E) for all E.
template <class O>
ExtendedRational min_ratio(const FiniteDist<O>& p, const FiniteDist<O>& q) {
  Rational best = 0;
  for (const auto& [o, pm] : p) {
    Rational qm = q.mass(o);
    if (qm == 0) return ExtendedRational::infinity();
    Rational r = pm / qm;
    if (r > best) best = r;
  }
  return best;
}

template <class O>
Rational tv_distance(const FiniteDist<O>& p, const FiniteDist<O>& q) {
  Rational total = 0;
  for (const O& o : joint_support(p, q)) total += abs(p.mass(o) - q.mass(o));
  return total / 2;
}

}  // namespace cca
