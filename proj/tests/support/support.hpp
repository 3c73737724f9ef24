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

// Independent reference implementations and random generators shared by the
// unit and acceptance tests. Nothing here calls the library's checkers, so
// agreement between the two is evidence rather than tautology.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cca/cca.hpp"

namespace cca::testing {

using Gen = std::mt19937_64;

inline std::size_t uniform_index(Gen& g, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(g); }

/// Nonnegative integer weights summing to `total`, at least `nonzero` of
/// them positive (when total allows).
inline std::vector<std::int64_t> random_composition(Gen& g, std::size_t n, std::int64_t total, std::size_t nonzero) {
  std::vector<std::int64_t> w(n, 0);
  nonzero = std::min<std::size_t>({nonzero, n, static_cast<std::size_t>(total)});
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), g);
  for (std::size_t i = 0; i < nonzero; ++i) w[idx[i]] = 1;
  for (std::int64_t left = total - static_cast<std::int64_t>(nonzero); left > 0; --left) ++w[uniform_index(g, n)];
  return w;
}

/// Random probability vector with denominator at most max_den.
inline std::vector<Rational> random_masses(Gen& g, std::size_t n, std::int64_t max_den = 64, bool full_support = false) {
  std::int64_t lo = static_cast<std::int64_t>(full_support ? n : 1);
  std::int64_t den = std::uniform_int_distribution<std::int64_t>(std::max<std::int64_t>(lo, 1), max_den)(g);
  auto w = random_composition(g, n, den, full_support ? n : 1);
  std::vector<Rational> out;
  for (auto v : w) out.emplace_back(v, den);
  return out;
}

template <class O>
FiniteDist<O> random_dist(Gen& g, const std::vector<O>& outcomes, std::int64_t max_den = 64, bool full = false) {
  auto m = random_masses(g, outcomes.size(), max_den, full);
  std::map<O, Rational> out;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (m[i] != 0) out[outcomes[i]] += m[i];
  }
  return FiniteDist<O>(std::move(out));
}

// ---- closeness by explicit event enumeration -----------------------------

template <class O>
std::vector<O> union_support(const FiniteDist<O>& p, const FiniteDist<O>& q) {
  std::set<O> s;
  for (const auto& [o, m] : p) s.insert(o);
  for (const auto& [o, m] : q) s.insert(o);
  return {s.begin(), s.end()};
}

/// max over all events E of P(E) - rho Q(E), by enumerating every subset.
template <class O>
Rational brute_max_gap(const FiniteDist<O>& p, const FiniteDist<O>& q, const Rational& rho) {
  auto outs = union_support(p, q);
  if (outs.size() > 20) throw std::logic_error("support too large for event enumeration");
  Rational best = 0;  // the empty event
  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << outs.size()); ++mask) {
    Rational pe = 0;
    Rational qe = 0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if ((mask >> i) & 1U) {
        pe += p.mass(outs[i]);
        qe += q.mass(outs[i]);
      }
    }
    best = std::max(best, Rational(pe - rho * qe));
  }
  return best;
}

template <class O>
bool brute_close(const FiniteDist<O>& p, const FiniteDist<O>& q, const Rational& rho, const Rational& delta) {
  return brute_max_gap(p, q, rho) <= delta && brute_max_gap(q, p, rho) <= delta;
}

// ---- naive CCA checker -----------------------------------------------------

using Law = std::map<std::pair<std::string, std::uint32_t>, Rational>;

/// All traces from x0, collapsed to (string, credit union).
inline void naive_rollout(const CreditingPredictor& m, std::uint32_t s, const std::string& x, std::uint32_t acc,
                          const Rational& w, Law& out) {
  for (const auto& [tc, mass] : m.next(DocSet(s), x)) {
    const std::uint32_t c = acc | tc.credit.bits();
    if (tc.value == kEnd) {
      out[{x, c}] += w * mass;
    } else {
      naive_rollout(m, s, x + tc.value, c, w * mass, out);
    }
  }
}

inline Law naive_law(const CreditingPredictor& m, Level level, std::uint32_t s, const std::string& x) {
  Law out;
  if (level == Level::kRollout) {
    naive_rollout(m, s, x, 0, Rational(1), out);
  } else {
    for (const auto& [tc, mass] : m.next(DocSet(s), x)) out[{std::string(1, tc.value), tc.credit.bits()}] += mass;
  }
  return out;
}

inline std::vector<std::string> naive_prompts(const std::string& symbols, std::size_t horizon) {
  std::vector<std::string> out{""};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() == horizon) continue;
    for (char c : symbols) out.push_back(out[i] + c);
  }
  return out;
}

enum class NaiveStatus { kAlways, kClose, kViolated, kSkipped };

struct NaiveReport {
  bool overall = true;  ///< over the triples actually decided
  std::map<std::tuple<std::string, std::uint32_t, std::size_t>, NaiveStatus> triples;

  std::size_t count(NaiveStatus s) const {
    std::size_t n = 0;
    for (const auto& [k, v] : triples) n += v == s ? 1 : 0;
    return n;
  }
};

/// Definition-level CCA check: condition by hand, then test every event.
/// Triples whose joint support exceeds max_support are skipped.
inline NaiveReport naive_check_cca(const CreditingPredictor& m, Level level, const Rational& rho,
                                   const Rational& delta, std::size_t max_support = 16) {
  NaiveReport r;
  const std::size_t docs = m.universe().size();
  for (const std::string& x : naive_prompts(m.alphabet().symbols(), m.horizon())) {
    for (std::uint32_t s = 0; s < (std::uint32_t{1} << docs); ++s) {
      for (std::size_t i = 0; i < docs; ++i) {
        if (!((s >> i) & 1U)) continue;
        NaiveStatus& status = r.triples[{x, s, i}];
        Law on = naive_law(m, level, s, x);
        Law off = naive_law(m, level, s & ~(std::uint32_t{1} << i), x);
        Rational keep = 0;
        for (const auto& [o, w] : on) {
          if (!((o.second >> i) & 1U)) keep += w;
        }
        if (keep == 0) {
          status = NaiveStatus::kAlways;
          continue;
        }
        Law cond;
        for (const auto& [o, w] : on) {
          if (!((o.second >> i) & 1U)) cond[o] = w / keep;
        }
        using Key = std::pair<std::string, std::uint32_t>;
        FiniteDist<Key> p{std::move(cond)};
        FiniteDist<Key> q{std::move(off)};
        if (union_support(p, q).size() > max_support) {
          status = NaiveStatus::kSkipped;
          continue;
        }
        status = brute_close(p, q, rho, delta) ? NaiveStatus::kClose : NaiveStatus::kViolated;
        if (status == NaiveStatus::kViolated) r.overall = false;
      }
    }
  }
  return r;
}

// ---- random models ---------------------------------------------------------

struct ModelShape {
  std::string symbols = "ab";
  std::size_t docs = 1;
  std::size_t horizon = 2;
};

inline ModelShape random_shape(Gen& g, std::size_t max_symbols = 2, std::size_t max_docs = 2,
                               std::size_t max_horizon = 3) {
  ModelShape s;
  s.symbols = std::string("ab").substr(0, 1 + uniform_index(g, max_symbols));
  s.docs = 1 + uniform_index(g, max_docs);
  s.horizon = 1 + uniform_index(g, max_horizon);
  return s;
}

inline DataUniverse universe_of(std::size_t docs) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < docs; ++i) names.push_back("s" + std::to_string(i + 1));
  return DataUniverse(names);
}

/// Sparse random tabular model: each (S, x) row puts mass on 1-3 random
/// (token, credit ⊆ S) pairs; about half the rows copy the row of S minus a
/// random document so that close and violating triples both occur.
inline CreditingPredictor random_tabular_model(Gen& g, const ModelShape& shape, std::int64_t max_den = 16) {
  DataUniverse u = universe_of(shape.docs);
  Alphabet alphabet(shape.symbols);
  KernelTable table;
  std::vector<std::string> prompts = naive_prompts(shape.symbols, shape.horizon);
  for (DocSet s : u.datasets()) {
    for (const std::string& x : prompts) {
      if (!s.empty() && uniform_index(g, 2) == 0) {
        auto members = u.members(s);
        DocSet smaller = s.without(members[uniform_index(g, members.size())]);
        auto it = table.find({smaller, x});
        table.emplace(std::make_pair(s, x), it == table.end() ? TokenDist::point({kEnd, DocSet{}}) : it->second);
        continue;
      }
      std::string tokens = x.size() < shape.horizon ? shape.symbols + kEnd : std::string(1, kEnd);
      std::vector<TokenCredit> outcomes;
      for (char t : tokens) {
        for (std::uint32_t c = 0; c <= s.bits(); ++c) {
          if (DocSet(c).subset_of(s)) outcomes.push_back({t, DocSet(c)});
        }
      }
      std::shuffle(outcomes.begin(), outcomes.end(), g);
      outcomes.resize(std::min<std::size_t>(outcomes.size(), 1 + uniform_index(g, 3)));
      table.emplace(std::make_pair(s, x), random_dist(g, outcomes, max_den));
    }
  }
  return CreditingPredictor::tabular(alphabet, u, shape.horizon, std::move(table));
}

/// Random model that is CCA for some finite rho at the next-token level:
/// full-support tokens (⊥ forced at the horizon) and, per (x, doc), a credit
/// rate that is either 1 for every token or drawn from {0, 1/4, 1/2, 3/4}
/// per token, independently of the rest of S.
inline CreditingPredictor random_cca_model(Gen& g, const ModelShape& shape, std::int64_t max_den = 64) {
  DataUniverse u = universe_of(shape.docs);
  Alphabet alphabet(shape.symbols);
  const std::string tokens = shape.symbols + kEnd;
  std::vector<std::string> prompts = naive_prompts(shape.symbols, shape.horizon);
  // rate[x][doc][token]
  std::map<std::string, std::vector<std::map<char, Rational>>> rate;
  for (const std::string& x : prompts) {
    auto& per_doc = rate[x];
    per_doc.resize(shape.docs);
    for (std::size_t d = 0; d < shape.docs; ++d) {
      const bool always = uniform_index(g, 20) == 0;
      for (char t : tokens) per_doc[d][t] = always ? Rational(1) : Rational(static_cast<std::int64_t>(uniform_index(g, 4)), 4);
    }
  }
  KernelTable table;
  for (DocSet s : u.datasets()) {
    for (const std::string& x : prompts) {
      std::vector<char> ts;
      if (x.size() < shape.horizon) {
        ts.assign(tokens.begin(), tokens.end());
      } else {
        ts = {kEnd};
      }
      auto masses = random_masses(g, ts.size(), max_den, true);
      std::map<TokenCredit, Rational> row;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        // Independent inclusion of each member of S.
        std::map<DocSet, Rational> credits{{DocSet{}, Rational(1)}};
        for (std::size_t d : u.members(s)) {
          std::map<DocSet, Rational> next;
          const Rational& pi = rate[x][d][ts[k]];
          for (const auto& [c, w] : credits) {
            if (pi != 0) next[c.with(d)] += w * pi;
            if (pi != 1) next[c] += w * (1 - pi);
          }
          credits = std::move(next);
        }
        for (const auto& [c, w] : credits) row[{ts[k], c}] += masses[k] * w;
      }
      table.emplace(std::make_pair(s, x), TokenDist(std::move(row)));
    }
  }
  return CreditingPredictor::tabular(alphabet, u, shape.horizon, std::move(table));
}

/// One-document model on which charging only generated tokens understates
/// the rollout bound: next-token rho is 4/3, rollout rho is 9/8, and the
/// output λ has ratio 4/3 with zero generated tokens.
inline CreditingPredictor generated_token_counterexample() {
  const DocSet s1 = DocSet::single(0);
  const DocSet none{};
  const char x = 'x';
  KernelTable t;
  t.emplace(std::make_pair(s1, std::string()),
            TokenDist{{{kEnd, none}, Rational(1, 4)}, {{x, none}, Rational(1, 4)}, {{kEnd, s1}, Rational(1, 4)},
                      {{x, s1}, Rational(1, 4)}});
  t.emplace(std::make_pair(none, std::string()), TokenDist{{{kEnd, none}, Rational(5, 8)}, {{x, none}, Rational(3, 8)}});
  t.emplace(std::make_pair(s1, std::string("x")), TokenDist{{{kEnd, none}, Rational(1, 2)}, {{kEnd, s1}, Rational(1, 2)}});
  return CreditingPredictor::tabular(Alphabet("x"), DataUniverse({"s1"}), 1, std::move(t));
}

// ---- LP oracle ---------------------------------------------------------------

struct DoubleMargins {
  std::vector<double> p;
  std::vector<double> q;
};

inline DoubleMargins to_double_margins(const OutputMargins& m) {
  DoubleMargins d;
  for (std::size_t i = 0; i < m.outputs.size(); ++i) {
    d.p.push_back(to_double(m.p[i]));
    d.q.push_back(to_double(m.q[i]));
  }
  return d;
}

/// Sandwich feasibility of a candidate R: per-output bounds
/// q R / (rho p) <= r <= min(rho q R / p, 1) must be nonempty and their
/// p-weighted sums must bracket R.
inline bool grid_feasible(const DoubleMargins& m, double rho, double R, double tol = 1e-12) {
  double lo_sum = 0;
  double hi_sum = 0;
  for (std::size_t i = 0; i < m.p.size(); ++i) {
    const double p = m.p[i];
    const double q = m.q[i];
    if (p == 0) {
      if (q * R / rho > tol) return false;
      continue;
    }
    const double lo = q * R / (rho * p);
    const double hi = std::min(rho * q * R / p, 1.0);
    if (lo > hi + tol) return false;
    lo_sum += lo * p;
    hi_sum += hi * p;
  }
  return lo_sum <= R + tol && R <= hi_sum + tol;
}

/// Largest feasible R: a 10^5-point scan, then bisection inside the last
/// feasible cell so the answer resolves well below the grid spacing. At
/// rho = 1 the sandwich is an equality, hence the small tolerance.
inline double grid_optimum(const DoubleMargins& m, double rho, std::size_t points = 100000) {
  std::size_t best = 0;
  for (std::size_t k = 0; k <= points; ++k) {
    if (grid_feasible(m, rho, static_cast<double>(k) / static_cast<double>(points))) best = k;
  }
  double lo = static_cast<double>(best) / static_cast<double>(points);
  if (best == points) return lo;
  double hi = static_cast<double>(best + 1) / static_cast<double>(points);
  for (int it = 0; it < 80; ++it) {
    double mid = (lo + hi) / 2;
    (grid_feasible(m, rho, mid) ? lo : hi) = mid;
  }
  return lo;
}

/// Random output margins: 1-8 outputs, denominators <= 64, with occasional
/// zeros on either side.
inline OutputMargins random_margins(Gen& g, std::int64_t max_den = 64) {
  const std::size_t n = 1 + uniform_index(g, 8);
  std::vector<std::string> outs;
  for (std::size_t i = 0; i < n; ++i) outs.push_back("y" + std::to_string(i));
  const bool full = uniform_index(g, 3) != 0;
  return make_margins(random_dist(g, outs, max_den, full), random_dist(g, outs, max_den, full));
}

/// Exact LP constraints of the augmentation program.
inline bool lp_constraints_hold(const OutputMargins& m, const Rational& rho, const AugmentationSolution& s) {
  Rational total = 0;
  for (std::size_t i = 0; i < m.outputs.size(); ++i) {
    const Rational& r = s.r.at(m.outputs[i]);
    if (r < 0 || r > 1) return false;
    const Rational rp = r * m.p[i];
    if (m.q[i] * s.R_star / rho > rp || rp > rho * m.q[i] * s.R_star) return false;
    total += rp;
  }
  return total == s.R_star;
}

inline std::string random_bits(Gen& g, std::size_t n) {
  std::string z(n, '0');
  for (char& c : z) c = uniform_index(g, 2) ? '1' : '0';
  return z;
}

}  // namespace cca::testing
