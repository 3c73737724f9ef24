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

// JSON model files and report serialization. Rationals are always written
// as "num/den" strings; floats only appear under keys ending in "_approx".

#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cca/composition.hpp"
#include "cca/finite_dist.hpp"
#include "cca/predictor.hpp"
#include "cca/retrofit.hpp"
#include "cca/verify.hpp"

namespace cca {

using Json = nlohmann::ordered_json;

class ModelParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string token_text(char c) { return c == kEnd ? std::string(kEndDisplay) : std::string(1, c); }

inline char token_from_text(const std::string& text, const std::string& where) {
  if (text == kEndDisplay) return kEnd;
  if (text.size() != 1) throw ModelParseError(where + ": token '" + text + "' is not a single symbol");
  return text[0];
}

inline std::string ext_text(const ExtendedRational& r) { return r.is_infinite() ? "inf" : to_string(r.value()); }

inline Json approx(double v) { return std::isfinite(v) ? Json(v) : Json("inf"); }

}  // namespace detail

inline std::string describe(const CreditedOutput& o, const DataUniverse& u) {
  return "(" + display(o.value) + "," + u.format(o.credit) + ")";
}

/// Canonical JSON form of a predictor. Procedural models are tabulated
/// first, so the result lists only rows that differ from (⊥,∅).
inline Json model_to_json(const CreditingPredictor& model) {
  if (model.table() == nullptr) return model_to_json(tabulate(model));
  const KernelTable* table = model.table();
  Json j;
  Json alphabet = Json::array();
  for (char c : model.alphabet().symbols()) alphabet.push_back(std::string(1, c));
  j["alphabet"] = alphabet;
  j["universe"] = model.universe().names();
  j["horizon"] = model.horizon();
  Json rows = Json::array();
  for (const auto& [key, dist] : *table) {
    Json row;
    row["dataset"] = key.first.bits();
    row["prompt"] = key.second;
    Json next = Json::array();
    for (const auto& [tc, m] : dist) {
      Json e;
      e["token"] = detail::token_text(tc.value);
      e["credit"] = tc.credit.bits();
      e["mass"] = to_string(m);
      next.push_back(std::move(e));
    }
    row["next"] = std::move(next);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline std::string model_to_string(const CreditingPredictor& model) { return model_to_json(model).dump(2) + "\n"; }

inline CreditingPredictor model_from_json(const Json& j) {
  try {
    std::string symbols;
    for (const auto& s : j.at("alphabet")) {
      std::string text = s.get<std::string>();
      if (text.size() != 1) throw ModelParseError("alphabet: symbol '" + text + "' is not a single character");
      symbols += text;
    }
    Alphabet alphabet(symbols);
    DataUniverse universe(j.at("universe").get<std::vector<std::string>>());
    auto horizon = j.at("horizon").get<std::size_t>();
    KernelTable table;
    const Json& rows = j.at("rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = "row " + std::to_string(i);
      try {
        const Json& row = rows[i];
        DocSet dataset(row.at("dataset").get<std::uint32_t>());
        std::string prompt = row.at("prompt").get<std::string>();
        std::vector<std::pair<TokenCredit, Rational>> entries;
        for (const auto& e : row.at("next")) {
          char token = detail::token_from_text(e.at("token").get<std::string>(), where);
          DocSet credit(e.at("credit").get<std::uint32_t>());
          if (!credit.subset_of(dataset)) throw ModelParseError(where + ": credit set not within dataset");
          if (!alphabet.contains(token)) throw ModelParseError(where + ": token outside alphabet");
          entries.emplace_back(TokenCredit{token, credit}, parse_rational(e.at("mass").get<std::string>()));
        }
        if (!dataset.subset_of(universe.all())) throw ModelParseError(where + ": dataset outside universe");
        if (!alphabet.is_word(prompt)) throw ModelParseError(where + ": prompt not over alphabet");
        if (prompt.size() > horizon) throw ModelParseError(where + ": prompt longer than horizon");
        auto [it, inserted] = table.emplace(std::make_pair(dataset, prompt), TokenDist(entries));
        if (!inserted) throw ModelParseError(where + ": duplicate (dataset, prompt)");
      } catch (const ModelParseError&) {
        throw;
      } catch (const std::exception& e) {
        throw ModelParseError(where + ": " + e.what());
      }
    }
    return CreditingPredictor::tabular(std::move(alphabet), std::move(universe), horizon, std::move(table));
  } catch (const ModelParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelParseError(std::string("model file: ") + e.what());
  }
}

inline CreditingPredictor model_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ModelParseError(std::string("model file is not JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline CreditingPredictor load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelParseError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_string(buf.str());
}

inline Json to_json(const CcaReport& report, const DataUniverse& universe, Level level) {
  Json j;
  j["level"] = to_string(level);
  j["rho"] = to_string(report.rho);
  j["delta"] = to_string(report.delta);
  j["overall"] = report.overall;
  ExtendedRational worst = report.max_min_rho();
  j["min_rho"] = detail::ext_text(worst);
  j["min_epsilon_approx"] = detail::approx(worst.log());
  Json triples = Json::array();
  for (const auto& t : report.triples) {
    Json e;
    e["prompt"] = t.prompt;
    e["dataset"] = universe.format(t.dataset);
    e["document"] = universe.name(t.doc);
    e["status"] = to_string(t.status);
    e["credit_prob"] = to_string(t.credit_prob);
    if (t.status != TripleStatus::kAlwaysCredits) {
      e["min_rho_conditional_over_counterfactual"] = detail::ext_text(t.conditional_over_counterfactual);
      e["min_rho_counterfactual_over_conditional"] = detail::ext_text(t.counterfactual_over_conditional);
      e["slack"] = to_string(t.closeness.slack);
    }
    if (t.status == TripleStatus::kViolated) {
      e["direction"] = to_string(t.closeness.direction);
      Json w = Json::array();
      for (const auto& o : *t.closeness.witness_event) w.push_back(describe(o, universe));
      e["witness"] = std::move(w);
    }
    triples.push_back(std::move(e));
  }
  j["triples"] = std::move(triples);
  return j;
}

inline Json to_json(const CompositionBound& b, const DataUniverse& universe) {
  Json j;
  j["always_credits"] = b.always_credits;
  j["rho"] = to_string(b.rho);
  j["convention"] = b.convention == StepConvention::kAllRounds ? "all-rounds" : "generated-tokens";
  j["not_credited_prob"] = to_string(b.not_credited_prob);
  Json terms = Json::array();
  for (const auto& t : b.terms) {
    Json e;
    e["output"] = t.output;
    e["credit"] = universe.format(t.credit);
    e["step_product"] = to_string(t.step_product);
    e["ratio"] = to_string(t.ratio);
    e["steps"] = t.steps;
    e["rounds"] = t.rounds;
    e["term_approx"] = std::log(to_double(b.term_exp(t)));
    terms.push_back(std::move(e));
  }
  j["terms"] = std::move(terms);
  if (!b.always_credits) {
    j["bound_exp"] = to_string(b.bound_exp());
    j["bound_approx"] = b.bound();
  }
  return j;
}

inline Json to_json(const OutputMargins& m, const AugmentationSolution& sol) {
  Json j;
  j["R_star"] = to_string(sol.R_star);
  j["credit_probability"] = to_string(sol.credit_probability());
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    Json e;
    e["output"] = m.outputs[i];
    e["p"] = to_string(m.p[i]);
    e["q"] = to_string(m.q[i]);
    e["r"] = to_string(sol.r.at(m.outputs[i]));
    rows.push_back(std::move(e));
  }
  j["outputs"] = std::move(rows);
  return j;
}

}  // namespace cca
