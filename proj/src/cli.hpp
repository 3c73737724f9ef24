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

// Command-line front end: argument parsing, config files and output
// routing for the experiments in cca/experiments.hpp.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cca::cli {

/// Runs the tool on `args` (program name excluded). The one-line verdict
/// and, without --out, the data go to `out`; diagnostics go to `err`.
/// Returns 0 on pass, 1 when the checked property fails, 2 on bad usage or
/// unreadable input.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Expands a JSON config object into flags. Keys become --key (underscores
/// map to dashes), arrays repeat the flag, `true` emits a bare flag and the
/// key "experiment" names the subcommand. Flags already present win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const std::string& json_text);

}  // namespace cca::cli
