// Copyright 2026 the tempair authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "cli/config.hpp"

namespace tempair::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitTolerance = 3;
inline constexpr int kExitDegenerate = 4;

int cmd_theorem1(const ExperimentConfig& config);
int cmd_kl_temperature(const ExperimentConfig& config);
int cmd_sweep(const ExperimentConfig& config, std::size_t workers);
int cmd_residuals(const ExperimentConfig& config);
int cmd_equivariance(const ExperimentConfig& config);

// Dispatch with the documented exit-code mapping (0 ok, 2 config error,
// 3 tolerance failure, 4 degenerate model).
int run_command(const std::string& name, const ExperimentConfig& config,
                std::size_t workers);

}  // namespace tempair::cli
