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

#include <Eigen/Dense>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "tempair/sampler.hpp"

namespace tempair::cli {

// Fixed shortest-roundtrip float formatting so reruns are byte-identical.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  static std::string cell(double value) { return format_double(value); }
  static std::string cell(std::size_t value) { return std::to_string(value); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

void write_json_file(const std::string& path, const nlohmann::json& doc);

// Every subcommand writes out_dir/manifest.json with the config echo, seed,
// version and wall time. The wall-time and timestamp fields are the only
// run-varying content in any output.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& config, double wall_time_s);

// Chain checkpoint: flat little-endian doubles plus a JSON sidecar holding
// the sample epochs and the layer-offset table.
void write_chain_checkpoint(
    const std::string& path_prefix, const sampler::Chain& chain,
    const std::vector<std::pair<std::size_t, std::size_t>>& layout,
    const nlohmann::json& meta);

void write_trace_csv(const std::string& path, const sampler::Chain& chain);

void ensure_dir(const std::string& path);

}  // namespace tempair::cli
