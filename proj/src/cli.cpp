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

#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "cca/cca.hpp"

namespace cca::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Rational rational_arg(const std::string& flag, const std::string& text) {
  try {
    return parse_rational(text);
  } catch (const std::exception& e) {
    throw UsageError("--" + flag + ": expected \"num/den\", got \"" + text + "\" (" + e.what() + ")");
  }
}

std::string ratio_text(const ExtendedRational& r) { return r.str(); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

// rho flags shared by the threshold-taking commands.
struct RhoArgs {
  std::string rho;
  std::optional<double> epsilon;
  std::string round = "auto";
};

void add_rho_options(CLI::App* app, RhoArgs& a, const std::string& fallback) {
  auto* r = app->add_option("--rho", a.rho, "e^eps as an exact \"num/den\" (default " + fallback + ")");
  auto* e = app->add_option("--epsilon", a.epsilon, "eps as a float; converted to rational rho");
  app->add_option("--round", a.round, "rounding of e^eps: down, up, or auto (bracket and report both)")
      ->check(CLI::IsMember({"auto", "down", "up"}));
  r->excludes(e);
}

// A bracket [down, up] around e^eps, or a single exact rho.
struct RhoChoice {
  Rational down;
  Rational up;
  std::string source;

  bool exact() const { return down == up; }
};

RhoChoice resolve_rho(const RhoArgs& a, const std::string& fallback) {
  if (!a.epsilon) {
    Rational rho = rational_arg("rho", a.rho.empty() ? fallback : a.rho);
    if (rho < 1) throw UsageError("--rho must be >= 1");
    return {rho, rho, "rho"};
  }
  try {
    Rational down = rho_from_epsilon(*a.epsilon, Rounding::kDown);
    Rational up = rho_from_epsilon(*a.epsilon, Rounding::kUp);
    if (a.round == "down") return {down, down, "epsilon rounded down"};
    if (a.round == "up") return {up, up, "epsilon rounded up"};
    return {down, up, "epsilon bracketed"};
  } catch (const std::exception& e) {
    throw UsageError(std::string("--epsilon: ") + e.what());
  }
}

Json rho_json(const RhoChoice& c) {
  Json j;
  j["source"] = c.source;
  j["rho_down"] = to_string(c.down);
  j["rho_up"] = to_string(c.up);
  return j;
}

Level level_arg(const std::string& text) { return text == "rollout" ? Level::kRollout : Level::kNextToken; }

// Data goes to --out when given, otherwise to stdout after the verdict.
class Output {
 public:
  Output(std::string path, std::ostream& out) : path_(std::move(path)), out_(out) {}

  void verdict(const std::string& line) { out_ << line << '\n'; }

  void data(const std::string& text, const std::string& path_override = "") {
    const std::string& path = path_override.empty() ? path_ : path_override;
    if (path.empty() || path == "-") {
      out_ << text;
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + path);
    f << text;
  }

 private:
  std::string path_;
  std::ostream& out_;
};

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

// ---- counterexample -------------------------------------------------------

struct CounterexampleArgs {
  std::string p = "1/10";
  std::string delta = "0";
  RhoArgs rho;
};

int run_counterexample(const CounterexampleArgs& a, Output& out) {
  const Rational p = rational_arg("p", a.p);
  const Rational delta = rational_arg("delta", a.delta);
  RhoChoice rho = resolve_rho(a.rho, "1");
  // A FAIL claim is sound at the upper end of the bracket.
  CounterexampleResult r;
  try {
    r = cmd_counterexample(p, rho.up, delta);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const DataUniverse u = build_counterexample(p).universe();
  Json j;
  j["experiment"] = "counterexample";
  j["p"] = to_string(p);
  j["rho"] = rho_json(rho);
  j["delta"] = to_string(delta);
  j["reproduced"] = r.reproduced();
  j["next_token_min_rho"] = ratio_text(r.next_token_min_rho);
  j["rollout_min_rho"] = ratio_text(r.rollout_min_rho);
  j["directional_min_ratio"] = ratio_text(r.directional_ratio);
  j["directional_epsilon_approx"] = detail::approx(r.directional_ratio.log());
  j["next_token"] = to_json(r.next_token, u, Level::kNextToken);
  j["rollout"] = to_json(r.rollout, u, Level::kRollout);

  std::string line = std::string(r.reproduced() ? "PASS" : "FAIL") + " counterexample p=" + to_string(p) +
                     ": next-token (0,0)-CCA " + (r.next_token.overall ? "holds" : "fails") + "; rollout (" +
                     to_string(rho.up) + "," + to_string(delta) + ")-CCA " + (r.rollout.overall ? "holds" : "fails") +
                     "; directional min-ratio " + ratio_text(r.directional_ratio) + ", full min-ratio " +
                     ratio_text(r.rollout_min_rho);
  out.verdict(line);
  out.data(json_text(j));
  return r.reproduced() ? kExitPass : kExitViolated;
}

// ---- retrofit-opt ---------------------------------------------------------

struct RetrofitArgs {
  std::size_t ell = 0;
  std::string z;
  std::string gamma = "1/2";
  std::string rho = "1";
  std::vector<std::string> prompts;
  std::string format = "csv";
};

int run_retrofit(const RetrofitArgs& a, Output& out) {
  if (a.z.size() != a.ell) {
    throw UsageError("--z has length " + std::to_string(a.z.size()) + " but --ell is " + std::to_string(a.ell));
  }
  HardFamily family{a.z, rational_arg("gamma", a.gamma), rational_arg("rho", a.rho)};
  std::vector<RetrofitRow> rows;
  try {
    family.validate();
    rows = cmd_retrofit_opt(family, a.prompts);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::size_t matched = 0;
  for (const auto& r : rows) matched += r.matches() ? 1 : 0;
  const bool ok = matched == rows.size();

  std::ostringstream data;
  if (a.format == "json") {
    Json j = Json::array();
    for (const auto& r : rows) {
      j.push_back({{"prompt", r.prompt},
                   {"solver_prob", to_string(r.solver_prob)},
                   {"closed_form_prob", to_string(r.closed_form_prob)},
                   {"match", r.matches()}});
    }
    data << json_text(j);
  } else {
    data << "prompt,solver_prob,closed_form_prob,match\n";
    for (const auto& r : rows) {
      data << r.prompt << ',' << to_string(r.solver_prob) << ',' << to_string(r.closed_form_prob) << ','
           << (r.matches() ? 1 : 0) << '\n';
    }
  }
  out.verdict(std::string(ok ? "PASS" : "FAIL") + " retrofit-opt ell=" + std::to_string(a.ell) + " z=" + a.z +
              " gamma=" + to_string(family.gamma) + " rho=" + to_string(family.rho) + ": solver equals closed form on " +
              std::to_string(matched) + "/" + std::to_string(rows.size()) + " prompts");
  out.data(data.str());
  return ok ? kExitPass : kExitViolated;
}

// ---- findz-scaling --------------------------------------------------------

struct ScalingArgs {
  std::optional<std::size_t> ell;
  std::size_t ell_min = 4;
  std::size_t ell_max = 12;
  std::string gamma = "1/2";
  std::string alpha = "0";
  std::string rho = "1";
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::string perturbation = "raise-prefixes";
  std::optional<double> tau;
  std::optional<double> beta;
  unsigned threads = 0;
  std::string trials_out;
  std::string format = "csv";
};

int run_scaling(const ScalingArgs& a, Output& out) {
  ScalingConfig cfg;
  cfg.ell_min = a.ell.value_or(a.ell_min);
  cfg.ell_max = a.ell.value_or(a.ell_max);
  cfg.gamma = rational_arg("gamma", a.gamma);
  cfg.alpha = rational_arg("alpha", a.alpha);
  cfg.rho = rational_arg("rho", a.rho);
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.perturbation = a.perturbation == "adversarial" ? Perturbation::kAdversarial : Perturbation::kRaisePrefixes;
  cfg.estimator.tau = a.tau;
  cfg.estimator.beta = a.beta;
  if (a.threads > 0) cfg.threads = a.threads;
  std::vector<ScalingRow> rows;
  try {
    rows = cmd_findz_scaling(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const bool ok = scaling_passes(rows);

  std::ostringstream data;
  if (a.format == "json") {
    Json j = Json::array();
    for (const auto& r : rows) {
      j.push_back({{"ell", r.ell},
                   {"findz_queries", r.findz_queries},
                   {"bruteforce_worstcase", r.bruteforce_worstcase},
                   {"success_rate", to_string(r.success_rate())},
                   {"success_rate_approx", to_double(r.success_rate())},
                   {"samples_per_estimate", r.samples_per_estimate},
                   {"ratio_approx", r.ratio()}});
    }
    data << json_text(j);
  } else {
    write_scaling_csv(data, rows);
  }
  if (!a.trials_out.empty()) {
    std::ostringstream trials;
    write_trials_csv(trials, rows);
    out.data(trials.str(), a.trials_out);
  }
  Rational worst = rows.front().success_rate();
  for (const auto& r : rows) worst = std::min(worst, r.success_rate());
  out.verdict(std::string(ok ? "PASS" : "FAIL") + " findz-scaling ell=" + std::to_string(cfg.ell_min) + ".." +
              std::to_string(cfg.ell_max) + " trials=" + std::to_string(cfg.trials) + " seed=" +
              std::to_string(cfg.seed) + ": min success " + to_string(worst) + " (need 2/3), bruteforce/findz " +
              fixed(rows.front().ratio()) + " -> " + fixed(rows.back().ratio()));
  out.data(data.str());
  return ok ? kExitPass : kExitViolated;
}

// ---- verify ---------------------------------------------------------------

struct VerifyArgs {
  std::string model;
  std::string level = "next-token";
  std::string delta = "0";
  RhoArgs rho;
};

CreditingPredictor load_or_usage(const std::string& path) {
  try {
    return load_model(path);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::string violation_text(const CcaReport& r, const DataUniverse& u) {
  const TripleVerdict* v = r.first_violation();
  if (v == nullptr) return "";
  return "; first violation at prompt " + display(v->prompt) + ", S=" + u.format(v->dataset) + ", " + u.name(v->doc);
}

int run_verify(const VerifyArgs& a, Output& out) {
  CreditingPredictor m = load_or_usage(a.model);
  const Level level = level_arg(a.level);
  const Rational delta = rational_arg("delta", a.delta);
  if (delta < 0 || delta > 1) throw UsageError("--delta must lie in [0,1]");
  RhoChoice rho = resolve_rho(a.rho, "1");

  // PASS is sound at the lower end of the bracket, FAIL at the upper end.
  CcaReport low = cmd_verify(m, rho.down, delta, level);
  std::optional<CcaReport> high;
  if (!low.overall && !rho.exact()) high = cmd_verify(m, rho.up, delta, level);
  const CcaReport& shown = high ? *high : low;
  const bool pass = low.overall;
  const bool fail = high ? !high->overall : !low.overall;

  Json j = to_json(shown, m.universe(), level);
  j["rho_choice"] = rho_json(rho);
  std::string tag = pass ? "PASS" : (fail ? "FAIL" : "INCONCLUSIVE");
  j["verdict"] = tag;
  out.verdict(tag + " verify " + a.model + " level=" + to_string(level) + " rho=" + to_string(shown.rho) +
              " delta=" + to_string(delta) + ": " + std::to_string(shown.triples.size()) + " triples, min rho " +
              ratio_text(shown.max_min_rho()) + violation_text(shown, m.universe()));
  out.data(json_text(j));
  return pass ? kExitPass : kExitViolated;
}

// ---- dump-model -----------------------------------------------------------

struct DumpArgs {
  std::string which = "counterexample";
  std::string p = "1/10";
  std::string z;
  std::string gamma = "1/2";
  std::string rho = "1";
};

CreditingPredictor named_model(const DumpArgs& a) {
  try {
    if (a.which == "hard") {
      HardFamily f{a.z, rational_arg("gamma", a.gamma), rational_arg("rho", a.rho)};
      f.validate();
      return tabulate(build_hard_model(f));
    }
    return build_counterexample(rational_arg("p", a.p));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int run_dump(const DumpArgs& a, const std::string& out_path, std::ostream& os) {
  std::string text = model_to_string(named_model(a));
  Output o(out_path, os);
  if (!out_path.empty() && out_path != "-") o.verdict("OK dump-model " + a.which + " -> " + out_path);
  o.data(text);
  return kExitPass;
}

// ---- compose --------------------------------------------------------------

struct ComposeArgs {
  std::string model;
  DumpArgs named;
  std::string rho;
  std::string rho_prime;
  std::string convention = "all-rounds";
  std::string prompt;
  std::optional<unsigned> dataset;
  std::string doc;
};

int run_compose(const ComposeArgs& a, Output& out) {
  CreditingPredictor m = a.model.empty() ? named_model(a.named) : load_or_usage(a.model);
  const DataUniverse& u = m.universe();
  const StepConvention conv =
      a.convention == "generated-tokens" ? StepConvention::kGeneratedTokens : StepConvention::kAllRounds;

  ExtendedRational rho_next = min_epsilon_cca(m, Level::kNextToken).overall;
  Rational rho;
  if (a.rho.empty()) {
    if (rho_next.is_infinite()) {
      out.verdict("FAIL compose: the next-token predictor is not CCA at any finite rho");
      return kExitViolated;
    }
    rho = rho_next.value();
  } else {
    rho = rational_arg("rho", a.rho);
  }
  ExtendedRational rho_prime = min_epsilon_cca(m, Level::kRollout).overall;
  if (!a.rho_prime.empty()) {
    rho_prime = a.rho_prime == "inf" ? ExtendedRational::infinity() : ExtendedRational(rational_arg("rho-prime", a.rho_prime));
  }

  DocSet dataset = a.dataset ? DocSet(*a.dataset) : u.all();
  if (!dataset.subset_of(u.all())) throw UsageError("--dataset names documents outside the universe");
  std::size_t doc = 0;
  if (!a.doc.empty()) {
    auto names = u.names();
    auto it = std::find(names.begin(), names.end(), a.doc);
    if (it == names.end()) throw UsageError("--doc " + a.doc + " is not in the universe");
    doc = static_cast<std::size_t>(it - names.begin());
  }
  if (!dataset.contains(doc)) throw UsageError("--doc must belong to --dataset");
  if (!u.all().contains(doc)) throw UsageError("empty universe");

  CompositionBound bound;
  try {
    bound = composition_lower_bound(m, dataset, doc, a.prompt, rho, conv);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  CompositionCheck check = verify_composition(m, rho, rho_prime, conv);

  Json j;
  j["experiment"] = "compose";
  j["rho"] = to_string(rho);
  j["rho_prime"] = ratio_text(rho_prime);
  j["prompt"] = a.prompt;
  j["dataset"] = u.format(dataset);
  j["document"] = u.name(doc);
  j["bound"] = to_json(bound, u);
  j["triples_checked"] = check.triples_checked;
  j["status"] = check.holds() ? "holds" : (check.status == CompositionStatus::kViolated ? "violated" : "precondition-failed");
  if (check.bound) {
    j["violation"] = {{"prompt", *check.prompt},
                      {"dataset", u.format(check.dataset)},
                      {"document", u.name(check.doc)},
                      {"bound", to_json(*check.bound, u)}};
  }

  std::string bound_text = bound.always_credits ? "always credits" : "exp(bound) " + to_string(bound.bound_exp());
  std::string line;
  if (check.holds()) {
    line = "PASS compose rho=" + to_string(rho) + ": rollout min rho " + ratio_text(rho_prime) +
           " dominates the bound on " + std::to_string(check.triples_checked) + " triples; at prompt " +
           display(a.prompt) + ": " + bound_text;
  } else if (check.status == CompositionStatus::kPreconditionFailed) {
    line = "FAIL compose: next-token predictor is not (" + to_string(rho) + ",0)-CCA";
  } else {
    line = "FAIL compose rho=" + to_string(rho) + ": bound " + to_string(check.bound->bound_exp()) + " exceeds rho' " +
           ratio_text(rho_prime) + " at prompt " + display(*check.prompt);
  }
  out.verdict(line);
  out.data(json_text(j));
  return check.holds() ? kExitPass : kExitViolated;
}

// Flags that take no value; everything else consumes the next argument.
bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args, const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("--config: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("--config: expected a JSON object");
  std::vector<std::string> out = args;
  if (j.contains("experiment")) {
    const std::string sub = j["experiment"].get<std::string>();
    bool present = false;
    for (const auto& a : args) present = present || a == sub;
    if (!present) out.insert(out.begin(), sub);
  }
  auto scalar = [](const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    if (has_flag(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        out.push_back(flag);
        out.push_back(scalar(v));
      }
    } else if (!value.is_null()) {
      out.push_back(flag);
      out.push_back(scalar(value));
    }
  }
  return out;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact verification of counterfactual credit attribution (CCA) for finite crediting predictors", "cca"};
  app.require_subcommand(1);
  std::string out_path;
  std::string config_path;
  std::string format;
  app.add_option("--config", config_path, "JSON file whose keys mirror the flags");

  auto add_common = [&](CLI::App* sub, const std::string& default_format, std::vector<std::string> formats) {
    sub->add_option("--out", out_path, "write data here instead of stdout");
    format = default_format;
    sub->add_option("--format", format, "output format")->check(CLI::IsMember(formats));
  };

  CounterexampleArgs ce;
  auto* c_ce = app.add_subcommand("counterexample", "next-token CCA predictor whose rollout is not CCA");
  c_ce->add_option("--p", ce.p, "the model's parameter p");
  c_ce->add_option("--delta", ce.delta, "additive slack delta");
  add_rho_options(c_ce, ce.rho, "1");
  add_common(c_ce, "json", {"json"});

  RetrofitArgs rf;
  auto* c_rf = app.add_subcommand("retrofit-opt", "credit-optimal augmentation of the hard family against its closed form");
  c_rf->add_option("--ell", rf.ell, "length of z")->required();
  c_rf->add_option("--z", rf.z, "the hidden 0/1 string")->required();
  c_rf->add_option("--gamma", rf.gamma, "crediting rate gamma");
  c_rf->add_option("--rho", rf.rho, "e^eps of the augmentation");
  c_rf->add_option("--prompt", rf.prompts, "prompt to tabulate (repeatable; default all 0/1 strings up to ell)");
  c_rf->add_option("--out", out_path, "write data here instead of stdout");
  c_rf->add_option("--format", rf.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  ScalingArgs sc;
  auto* c_sc = app.add_subcommand("findz-scaling", "FindZ query counts against worst-case brute force");
  auto* ell_opt = c_sc->add_option("--ell", sc.ell, "single ell (overrides the range)");
  c_sc->add_option("--ell-min", sc.ell_min, "smallest ell")->excludes(ell_opt);
  c_sc->add_option("--ell-max", sc.ell_max, "largest ell")->excludes(ell_opt);
  c_sc->add_option("--gamma", sc.gamma, "crediting rate gamma");
  c_sc->add_option("--alpha", sc.alpha, "oracle approximation alpha (< gamma/2)");
  c_sc->add_option("--rho", sc.rho, "e^eps of the hard family");
  c_sc->add_option("--trials", sc.trials, "trials per ell");
  c_sc->add_option("--seed", sc.seed, "master seed; trial i uses seed XOR i")->required();
  c_sc->add_option("--perturbation", sc.perturbation, "alpha-oracle shape")
      ->check(CLI::IsMember({"raise-prefixes", "adversarial"}));
  c_sc->add_option("--tau", sc.tau, "estimator tolerance (default 0.99 (gamma - 2 alpha)/2)");
  c_sc->add_option("--beta", sc.beta, "estimator failure probability (default 1/(6 ell))");
  c_sc->add_option("--threads", sc.threads, "worker threads (default: hardware)");
  c_sc->add_option("--trials-out", sc.trials_out, "per-trial CSV path");
  c_sc->add_option("--out", out_path, "write data here instead of stdout");
  c_sc->add_option("--format", sc.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  VerifyArgs vf;
  auto* c_vf = app.add_subcommand("verify", "check (rho, delta)-CCA of a tabular model file");
  c_vf->add_option("--model", vf.model, "tabular model JSON")->required();
  c_vf->add_option("--level", vf.level, "next-token or rollout")->check(CLI::IsMember({"next-token", "rollout"}));
  c_vf->add_option("--delta", vf.delta, "additive slack delta");
  add_rho_options(c_vf, vf.rho, "1");
  add_common(c_vf, "json", {"json"});

  DumpArgs dm;
  auto* c_dm = app.add_subcommand("dump-model", "write a built-in model as tabular JSON");
  c_dm->add_option("--which", dm.which, "counterexample or hard")->check(CLI::IsMember({"counterexample", "hard"}));
  c_dm->add_option("--p", dm.p, "counterexample parameter p");
  c_dm->add_option("--z", dm.z, "hard-family string z");
  c_dm->add_option("--gamma", dm.gamma, "hard-family gamma");
  c_dm->add_option("--rho", dm.rho, "hard-family rho");
  c_dm->add_option("--out", out_path, "output path");

  ComposeArgs cp;
  auto* c_cp = app.add_subcommand("compose", "rollout composition bound and its check against the rollout");
  auto* model_opt = c_cp->add_option("--model", cp.model, "tabular model JSON (default: built-in --which)");
  c_cp->add_option("--which", cp.named.which, "built-in model")
      ->check(CLI::IsMember({"counterexample", "hard"}))
      ->excludes(model_opt);
  c_cp->add_option("--p", cp.named.p, "counterexample parameter p");
  c_cp->add_option("--z", cp.named.z, "hard-family string z");
  c_cp->add_option("--gamma", cp.named.gamma, "hard-family gamma");
  c_cp->add_option("--rho", cp.rho, "next-token rho (default: the model's least)");
  c_cp->add_option("--rho-prime", cp.rho_prime, "rollout rho' or inf (default: the rollout's least)");
  c_cp->add_option("--convention", cp.convention, "factors of rho charged per output")
      ->check(CLI::IsMember({"all-rounds", "generated-tokens"}));
  c_cp->add_option("--prompt", cp.prompt, "prompt for the reported bound");
  c_cp->add_option("--dataset", cp.dataset, "dataset bitmask (default: whole universe)");
  c_cp->add_option("--doc", cp.doc, "document name (default: first)");
  add_common(c_cp, "json", {"json"});

  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        continue;
      }
      std::ifstream f(path);
      if (!f) throw UsageError("--config: cannot read " + path);
      std::stringstream buf;
      buf << f.rdbuf();
      args = expand_config(args, buf.str());
      break;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Output o(out_path, out);
    if (c_ce->parsed()) return run_counterexample(ce, o);
    if (c_rf->parsed()) return run_retrofit(rf, o);
    if (c_sc->parsed()) return run_scaling(sc, o);
    if (c_vf->parsed()) return run_verify(vf, o);
    if (c_dm->parsed()) return run_dump(dm, out_path, out);
    if (c_cp->parsed()) return run_compose(cp, o);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cca::cli
