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

#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cca/finite_dist.hpp"
#include "cca/rational.hpp"

namespace cca {

/// End-of-sequence token. Printed as "⊥" in reports and model files.
inline constexpr char kEnd = '$';
inline constexpr std::string_view kEndDisplay = "\xE2\x8A\xA5";

inline bool contains_end(std::string_view s) { return s.find(kEnd) != std::string_view::npos; }

/// Replaces the internal end marker by "⊥" for display.
inline std::string display(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == kEnd) {
      out += kEndDisplay;
    } else {
      out += c;
    }
  }
  return out.empty() ? std::string("λ") : out;
}

/// A subset of a data universe of at most 32 documents, as a bitmask.
class DocSet {
 public:
  constexpr DocSet() = default;
  constexpr explicit DocSet(std::uint32_t bits) : bits_(bits) {}

  static constexpr DocSet single(std::size_t doc) { return DocSet(std::uint32_t{1} << doc); }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(std::size_t doc) const { return (bits_ >> doc) & 1U; }
  constexpr bool subset_of(DocSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr DocSet with(std::size_t doc) const { return DocSet(bits_ | (std::uint32_t{1} << doc)); }
  constexpr DocSet without(std::size_t doc) const { return DocSet(bits_ & ~(std::uint32_t{1} << doc)); }
  constexpr int count() const { return std::popcount(bits_); }

  friend constexpr DocSet operator|(DocSet a, DocSet b) { return DocSet(a.bits_ | b.bits_); }
  friend constexpr auto operator<=>(DocSet, DocSet) = default;

 private:
  std::uint32_t bits_ = 0;
};

/// The ordered document universe s_1..s_m.
class DataUniverse {
 public:
  DataUniverse() = default;
  explicit DataUniverse(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() > 20) throw std::invalid_argument("universe too large to enumerate");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[i] == names_[j]) throw std::invalid_argument("duplicate document " + names_[i]);
      }
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t doc) const { return names_.at(doc); }
  DocSet all() const { return DocSet(static_cast<std::uint32_t>((std::uint64_t{1} << size()) - 1)); }

  /// All 2^m datasets, in bitmask order.
  std::vector<DocSet> datasets() const {
    std::vector<DocSet> out;
    for (std::uint32_t b = 0; b <= all().bits(); ++b) out.emplace_back(b);
    return out;
  }

  std::vector<std::size_t> members(DocSet s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (s.contains(i)) out.push_back(i);
    }
    return out;
  }

  std::string format(DocSet s) const {
    if (s.empty()) return "∅";
    std::string out = "{";
    for (std::size_t i : members(s)) {
      if (out.size() > 1) out += ",";
      out += names_[i];
    }
    return out + "}";
  }

  friend bool operator==(const DataUniverse&, const DataUniverse&) = default;

 private:
  std::vector<std::string> names_;
};

/// A value together with the credit set attached to it: a (token, C') pair
/// of a next-token predictor or a (string, C) pair of a rollout.
template <class V>
struct Credited {
  V value;
  DocSet credit;

  friend auto operator<=>(const Credited&, const Credited&) = default;
  friend bool operator==(const Credited&, const Credited&) = default;
};

using TokenCredit = Credited<char>;
using CreditedOutput = Credited<std::string>;
using OutputDist = FiniteDist<CreditedOutput>;

/// Finite token alphabet. The end token is implicit and always present.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      char c = symbols_[i];
      if (c == kEnd || c <= ' ' || c > '~') {
        throw std::invalid_argument(std::string("invalid token symbol '") + c + "'");
      }
      if (symbols_.find(c) != i) throw std::invalid_argument(std::string("duplicate token '") + c + "'");
    }
  }

  /// Non-end symbols, in declaration order.
  const std::string& symbols() const { return symbols_; }
  bool contains(char c) const { return c == kEnd || symbols_.find(c) != std::string::npos; }
  bool is_word(std::string_view s) const {
    for (char c : s) {
      if (c == kEnd || !contains(c)) return false;
    }
    return true;
  }

  /// All end-free strings of length at most max_len, shortest first.
  std::vector<std::string> words_up_to(std::size_t max_len) const {
    std::vector<std::string> out{""};
    std::size_t layer_begin = 0;
    for (std::size_t len = 1; len <= max_len; ++len) {
      std::size_t layer_end = out.size();
      for (std::size_t i = layer_begin; i < layer_end; ++i) {
        for (char c : symbols_) out.push_back(out[i] + c);
      }
      layer_begin = layer_end;
    }
    return out;
  }

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::string symbols_;
};

using TokenDist = FiniteDist<TokenCredit>;

/// Explicit kernel table keyed by (dataset, prompt). Missing rows mean the
/// (⊥, ∅) point mass.
using KernelTable = std::map<std::pair<DocSet, std::string>, TokenDist>;

enum class Representation { kTabular, kProcedural };

/// Thrown when a rollout would run past the declared horizon.
class NonTerminatingModel : public std::runtime_error {
 public:
  explicit NonTerminatingModel(const std::string& prompt)
      : std::runtime_error("non-terminating model: prompt '" + display(prompt) +
                           "' emits a non-end token at the horizon"),
        prompt_(prompt) {}
  const std::string& prompt() const { return prompt_; }

 private:
  std::string prompt_;
};

/// A crediting next-token predictor: (dataset, prompt) -> distribution over
/// (token, credit set). The horizon L bounds the length of every string the
/// model can produce; beyond it the kernel is the (⊥, ∅) point mass by
/// contract, and prompts containing ⊥ always yield (⊥, ∅).
class CreditingPredictor {
 public:
  using Kernel = std::function<TokenDist(DocSet, std::string_view)>;

  CreditingPredictor(Alphabet alphabet, DataUniverse universe, std::size_t horizon, Kernel kernel,
                     Representation representation = Representation::kProcedural)
      : alphabet_(std::move(alphabet)),
        universe_(std::move(universe)),
        horizon_(horizon),
        kernel_(std::move(kernel)),
        representation_(representation) {
    if (horizon_ == 0) throw std::invalid_argument("horizon must be positive");
  }

  static CreditingPredictor tabular(Alphabet alphabet, DataUniverse universe, std::size_t horizon,
                                    KernelTable table) {
    for (const auto& [key, dist] : table) {
      const auto& [dataset, prompt] = key;
      if (!dataset.subset_of(universe.all())) throw std::invalid_argument("row dataset outside universe");
      if (!alphabet.is_word(prompt)) throw std::invalid_argument("row prompt '" + prompt + "' not over alphabet");
      if (prompt.size() > horizon) throw std::invalid_argument("row prompt '" + prompt + "' longer than horizon");
      for (const auto& [tc, m] : dist) {
        if (!alphabet.contains(tc.value)) throw std::invalid_argument("row token outside alphabet");
        if (!tc.credit.subset_of(dataset)) throw std::invalid_argument("row credits a document outside its dataset");
      }
    }
    auto shared = std::make_shared<const KernelTable>(std::move(table));
    Kernel k = [shared](DocSet s, std::string_view prompt) {
      auto it = shared->find({s, std::string(prompt)});
      return it == shared->end() ? TokenDist::point({kEnd, DocSet{}}) : it->second;
    };
    CreditingPredictor m(std::move(alphabet), std::move(universe), horizon, std::move(k),
                         Representation::kTabular);
    m.table_ = std::move(shared);
    return m;
  }

  /// Next-token distribution M~(S, x). Validates the crediting requirement
  /// C' ⊆ S on every call.
  TokenDist next(DocSet dataset, std::string_view prompt) const {
    if (!dataset.subset_of(universe_.all())) throw std::invalid_argument("dataset outside universe");
    if (contains_end(prompt) || prompt.size() > horizon_) return TokenDist::point({kEnd, DocSet{}});
    TokenDist d = kernel_(dataset, prompt);
    for (const auto& [tc, m] : d) {
      if (!tc.credit.subset_of(dataset)) {
        throw std::logic_error("kernel credits a document outside the dataset at prompt '" +
                               display(prompt) + "'");
      }
      if (!alphabet_.contains(tc.value)) {
        throw std::logic_error(std::string("kernel emitted unknown token '") + tc.value + "'");
      }
    }
    return d;
  }

  const Alphabet& alphabet() const { return alphabet_; }
  const DataUniverse& universe() const { return universe_; }
  std::size_t horizon() const { return horizon_; }
  Representation representation() const { return representation_; }
  /// Non-null only for tabular predictors.
  const KernelTable* table() const { return table_.get(); }

  /// Every end-free prompt the model can be asked about (length <= horizon).
  std::vector<std::string> prompts() const { return alphabet_.words_up_to(horizon_); }

 private:
  Alphabet alphabet_;
  DataUniverse universe_;
  std::size_t horizon_;
  Kernel kernel_;
  Representation representation_;
  std::shared_ptr<const KernelTable> table_;
};

/// Materializes any predictor into a table, keeping only rows that differ
/// from the (⊥, ∅) default.
inline CreditingPredictor tabulate(const CreditingPredictor& m) {
  KernelTable table;
  const TokenDist end_point = TokenDist::point({kEnd, DocSet{}});
  for (DocSet s : m.universe().datasets()) {
    for (const std::string& x : m.prompts()) {
      TokenDist d = m.next(s, x);
      if (!(d == end_point)) table.emplace(std::make_pair(s, x), std::move(d));
    }
  }
  return CreditingPredictor::tabular(m.alphabet(), m.universe(), m.horizon(), std::move(table));
}

/// The credit-ignoring predictor M: same tokens, credit sets dropped.
inline CreditingPredictor drop_credits(const CreditingPredictor& m) {
  auto inner = std::make_shared<CreditingPredictor>(m);
  return CreditingPredictor(
      m.alphabet(), m.universe(), m.horizon(),
      [inner](DocSet s, std::string_view x) {
        return inner->next(s, x).map([](const TokenCredit& tc) { return TokenCredit{tc.value, DocSet{}}; });
      },
      Representation::kProcedural);
}

/// The next-token predictor whose crediting rollout is not CCA although the
/// predictor itself is (0,0)-CCA. Alphabet {a, b}, universe {s1}.
inline CreditingPredictor build_counterexample(const Rational& p) {
  if (p <= 0 || p >= 1) throw std::invalid_argument("counterexample needs 0 < p < 1");
  const DocSet s1 = DocSet::single(0);
  auto kernel = [p, s1](DocSet s, std::string_view x) -> TokenDist {
    const bool has_s1 = s.contains(0);
    if (x.empty()) return TokenDist{{{'a', {}}, p}, {{'b', {}}, 1 - p}};
    if (x == "a") {
      if (has_s1) return TokenDist{{{'a', s1}, Rational(1, 2)}, {{'b', {}}, Rational(1, 2)}};
      return TokenDist::point({'b', {}});
    }
    if (x == "b") return TokenDist::point({'a', has_s1 ? s1 : DocSet{}});
    return TokenDist::point({kEnd, {}});
  };
  return CreditingPredictor(Alphabet("ab"), DataUniverse({"s1"}), 2, kernel);
}

/// Parameters of the hard-to-retrofit family M_z over {0, 1}, universe {s1}.
struct HardFamily {
  std::string z;   ///< hidden bit string of length ell
  Rational gamma;  ///< optimal crediting probability on prefixes of z, in (0,1)
  Rational rho;    ///< e^epsilon, >= 1

  std::size_t ell() const { return z.size(); }
  /// Extra probability of emitting 1 at prompt z when s1 is present.
  Rational bias() const { return (1 - (1 - gamma) / rho) / 2; }

  void validate() const {
    if (z.empty()) throw std::invalid_argument("hard family needs ell >= 1");
    for (char c : z) {
      if (c != '0' && c != '1') throw std::invalid_argument("z must be a bit string");
    }
    if (gamma <= 0 || gamma >= 1) throw std::invalid_argument("gamma must lie in (0,1)");
    if (rho < 1) throw std::invalid_argument("rho must be >= 1");
  }
};

inline bool is_prefix(std::string_view prefix, std::string_view of) {
  return prefix.size() <= of.size() && of.substr(0, prefix.size()) == prefix;
}

/// M_z: Bern(1/2) on every bit prompt of length <= ell, except Bern(1/2 +
/// bias) at prompt z when the dataset is nonempty; ⊥ everywhere else. Never
/// credits.
inline CreditingPredictor build_hard_model(const HardFamily& family) {
  family.validate();
  const Rational half(1, 2);
  const Rational biased_one = half + family.bias();
  auto kernel = [family, half, biased_one](DocSet s, std::string_view x) -> TokenDist {
    if (x.size() > family.ell() || x.find_first_not_of("01") != std::string_view::npos) {
      return TokenDist::point({kEnd, {}});
    }
    if (!s.empty() && x == family.z) {
      return TokenDist{{{'0', {}}, 1 - biased_one}, {{'1', {}}, biased_one}};
    }
    return TokenDist{{{'0', {}}, half}, {{'1', {}}, half}};
  };
  return CreditingPredictor(Alphabet("01"), DataUniverse({"s1"}), family.ell() + 1, kernel);
}

}  // namespace cca
