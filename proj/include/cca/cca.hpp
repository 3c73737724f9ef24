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

// Umbrella header.

#pragma once

#include "cca/composition.hpp"
#include "cca/experiments.hpp"
#include "cca/finite_dist.hpp"
#include "cca/io.hpp"
#include "cca/oracle.hpp"
#include "cca/predictor.hpp"
#include "cca/rational.hpp"
#include "cca/retrofit.hpp"
#include "cca/rollout.hpp"
#include "cca/verify.hpp"
