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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cca/cca.hpp"
#include "cli.hpp"

namespace cca {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
  std::string first_line() const { return out.substr(0, out.find('\n')); }
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "cca_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, CounterexampleReproduces) {
  Outcome r = run({"counterexample"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.first_line().rfind("PASS", 0), 0u);
  EXPECT_NE(r.out.find("10/1"), std::string::npos);
  Outcome half = run({"counterexample", "--p", "1/2"});
  EXPECT_EQ(half.code, 0);
  EXPECT_NE(half.first_line().find("2/1"), std::string::npos);
}

TEST(Cli, CounterexampleRejectsOutOfRangeP) {
  Outcome r = run({"counterexample", "--p", "9/10", "--delta", "1/2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"no-such-command"}).code, 2);
  EXPECT_EQ(run({"findz-scaling", "--ell", "4"}).code, 2);  // --seed missing
  EXPECT_EQ(run({"retrofit-opt", "--ell", "3", "--z", "10"}).code, 2);
  EXPECT_EQ(run({"retrofit-opt", "--ell", "2", "--z", "1x"}).code, 2);
  EXPECT_EQ(run({"verify", "--model", "/nonexistent.json"}).code, 2);
  EXPECT_EQ(run({"counterexample", "--p", "abc"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, RetrofitTableMatches) {
  Outcome r = run({"retrofit-opt", "--ell", "3", "--z", "101"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.first_line().find("15/15"), std::string::npos);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line, "prompt,solver_prob,closed_form_prob,match");
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    EXPECT_EQ(line.back(), '1') << line;
  }
  EXPECT_EQ(rows, 15);
  Outcome json = run({"retrofit-opt", "--ell", "2", "--z", "10", "--prompt", "1", "--format", "json"});
  EXPECT_EQ(json.code, 0);
  Json j = Json::parse(json.out.substr(json.out.find('\n') + 1));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["prompt"], "1");
}

TEST(Cli, VerifyModelFiles) {
  fs::path ce = scratch("ce.json");
  ASSERT_EQ(run({"dump-model", "--which", "counterexample", "--out", ce.string()}).code, 0);
  EXPECT_EQ(run({"verify", "--model", ce.string(), "--level", "next-token"}).code, 0);
  Outcome roll = run({"verify", "--model", ce.string(), "--level", "rollout"});
  EXPECT_EQ(roll.code, 1);
  EXPECT_EQ(roll.first_line().rfind("FAIL", 0), 0u);

  fs::path always = scratch("always.json");
  std::ofstream(always) << R"({"alphabet":["a"],"universe":["s1"],"horizon":1,"rows":[
    {"dataset":1,"prompt":"","next":[{"token":"a","credit":1,"mass":"1/3"},{"token":"⊥","credit":1,"mass":"2/3"}]},
    {"dataset":1,"prompt":"a","next":[{"token":"⊥","credit":1,"mass":"1"}]}]})";
  EXPECT_EQ(run({"verify", "--model", always.string(), "--level", "rollout"}).code, 0);

  fs::path bad = scratch("bad.json");
  std::ofstream(bad) << R"({"alphabet":["a"],"universe":["s1"],"horizon":1,"rows":[
    {"dataset":0,"prompt":"","next":[{"token":"a","credit":1,"mass":"1"}]}]})";
  Outcome br = run({"verify", "--model", bad.string()});
  EXPECT_EQ(br.code, 2);
  EXPECT_NE(br.err.find("row 0"), std::string::npos) << br.err;
}

TEST(Cli, VerifyEpsilonBracket) {
  fs::path ce = scratch("ce_eps.json");
  ASSERT_EQ(run({"dump-model", "--which", "counterexample", "--out", ce.string()}).code, 0);
  // Next-token closeness holds at every rho >= 1, so both roundings agree.
  EXPECT_EQ(run({"verify", "--model", ce.string(), "--level", "next-token", "--epsilon", "0.5"}).code, 0);
  EXPECT_EQ(run({"verify", "--model", ce.string(), "--level", "rollout", "--epsilon", "2"}).code, 1);
  EXPECT_EQ(run({"verify", "--model", ce.string(), "--epsilon", "0.5", "--rho", "2"}).code, 2);
}

TEST(Cli, ScalingCsvIsDeterministic) {
  fs::path a = scratch("a.csv");
  fs::path at = scratch("a_trials.csv");
  fs::path b = scratch("b.csv");
  fs::path bt = scratch("b_trials.csv");
  std::vector<std::string> base = {"findz-scaling", "--ell-min", "4", "--ell-max", "6", "--trials", "6", "--seed", "17"};
  auto with = [&](const fs::path& out, const fs::path& trials, const std::string& threads) {
    auto v = base;
    v.insert(v.end(), {"--out", out.string(), "--trials-out", trials.string(), "--threads", threads});
    return run(v);
  };
  EXPECT_EQ(with(a, at, "1").code, 0);
  EXPECT_EQ(with(b, bt, "4").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(at), slurp(bt));
  EXPECT_EQ(slurp(a).rfind("ell,findz_queries,bruteforce_worstcase,success_rate", 0), 0u);
}

TEST(Cli, ComposeReportsBound) {
  Outcome r = run({"compose", "--which", "counterexample"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.first_line().find("10/1"), std::string::npos);
  EXPECT_EQ(run({"compose", "--which", "counterexample", "--convention", "generated-tokens"}).code, 0);
}

TEST(Config, ExpandsKeysIntoFlags) {
  auto args = cli::expand_config({"--trials", "3"}, R"({"experiment":"findz-scaling","ell_min":4,"trials":9,
      "seed":5,"prompt":["0","1"],"verbose":true,"quiet":false})");
  ASSERT_FALSE(args.empty());
  EXPECT_EQ(args[0], "findz-scaling");
  auto count = [&](const std::string& f) { return std::count(args.begin(), args.end(), f); };
  EXPECT_EQ(count("--ell-min"), 1);
  EXPECT_EQ(count("--trials"), 1);
  EXPECT_NE(std::find(args.begin(), args.end(), "3"), args.end());
  EXPECT_EQ(std::find(args.begin(), args.end(), "9"), args.end());
  EXPECT_EQ(count("--prompt"), 2);
  EXPECT_EQ(count("--verbose"), 1);
  EXPECT_EQ(count("--quiet"), 0);
}

TEST(Config, FileDrivesARun) {
  fs::path cfg = scratch("cfg.json");
  std::ofstream(cfg) << R"({"experiment":"retrofit-opt","ell":2,"z":"01","gamma":"1/4"})";
  Outcome r = run({"--config", cfg.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.first_line().find("gamma=1/4"), std::string::npos);
  EXPECT_EQ(run({"--config", scratch("missing.json").string()}).code, 2);
}

}  // namespace
}  // namespace cca
