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

// Exact rational numbers and the rho = e^epsilon conversions used at the
// reporting boundary.

#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace cca {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  return Rational(BigInt(num), BigInt(den));
}

/// Serializes as "num/den", always with an explicit denominator.
inline std::string to_string(const Rational& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

/// Accepts "num/den" or a bare integer. Surrounding whitespace is not allowed.
inline Rational parse_rational(std::string_view text) {
  auto parse_int = [&](std::string_view part) {
    if (part.empty()) throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    std::size_t start = (part[0] == '-' || part[0] == '+') ? 1 : 0;
    if (start == part.size()) throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    for (std::size_t i = start; i < part.size(); ++i) {
      if (part[i] < '0' || part[i] > '9') {
        throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
      }
    }
    return BigInt(std::string(part[0] == '+' ? part.substr(1) : part));
  };
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  BigInt num = parse_int(text.substr(0, slash));
  BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return Rational(num, den);
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline Rational pow(const Rational& base, unsigned exponent) {
  Rational out = 1;
  for (unsigned i = 0; i < exponent; ++i) out *= base;
  return out;
}

/// A nonnegative rational extended with +infinity. Used for likelihood
/// ratios where the denominator distribution has a zero.
class ExtendedRational {
 public:
  ExtendedRational() = default;
  ExtendedRational(Rational value) : value_(std::move(value)) {}  // NOLINT
  ExtendedRational(std::int64_t value) : value_(value) {}         // NOLINT

  static ExtendedRational infinity() {
    ExtendedRational r;
    r.infinite_ = true;
    return r;
  }

  bool is_infinite() const { return infinite_; }
  const Rational& value() const {
    if (infinite_) throw std::logic_error("value() on infinite ExtendedRational");
    return value_;
  }

  double to_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : cca::to_double(value_);
  }
  double log() const { return std::log(to_double()); }

  friend bool operator==(const ExtendedRational& a, const ExtendedRational& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }
  friend std::strong_ordering operator<=>(const ExtendedRational& a, const ExtendedRational& b) {
    if (a.infinite_ || b.infinite_) {
      return static_cast<int>(a.infinite_) <=> static_cast<int>(b.infinite_);
    }
    if (a.value_ < b.value_) return std::strong_ordering::less;
    if (b.value_ < a.value_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend std::ostream& operator<<(std::ostream& os, const ExtendedRational& r) {
    return os << r.str();
  }
  std::string str() const { return infinite_ ? "inf" : cca::to_string(value_); }

 private:
  Rational value_{0};
  bool infinite_ = false;
};

inline ExtendedRational max(const ExtendedRational& a, const ExtendedRational& b) {
  return a < b ? b : a;
}

enum class Rounding { kDown, kUp };

/// Converts a floating epsilon to an exact rho approximating e^epsilon on a
/// 1/denominator grid, rounded in the requested direction. The one-ulp-scale
/// guard keeps the direction honest despite libm error in exp().
inline Rational rho_from_epsilon(double epsilon, Rounding rounding,
                                 std::int64_t denominator = 10'000'000'000) {
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be finite and nonnegative");
  }
  const long double scaled = std::exp(static_cast<long double>(epsilon)) *
                             static_cast<long double>(denominator);
  constexpr long double kGuard = 1e-15L;
  long double edge = rounding == Rounding::kDown ? std::floor(scaled * (1 - kGuard))
                                                 : std::ceil(scaled * (1 + kGuard));
  if (edge > 9.0e18L) throw std::out_of_range("epsilon too large for rational rho");
  Rational rho(BigInt(static_cast<std::int64_t>(edge)), BigInt(denominator));
  if (rho < 1) rho = 1;
  return rho;
}

}  // namespace cca
