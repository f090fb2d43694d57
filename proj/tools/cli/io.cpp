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

#include "cli/io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tempair/errors.hpp"

namespace tempair::cli {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot open output file '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i) {
    out_ << (i ? "," : "") << header[i];
  }
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("csv row width mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << (i ? "," : "") << cells[i];
  }
  out_ << "\n";
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << doc.dump(2) << "\n";
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ConfigError("cannot create output directory '" + path + "'");
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& config, double wall_time_s) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config"] = config.echo;
  doc["seed"] = config.seed;
  doc["versions"] = {{"tempair", "0.1.0"}};
  doc["wall_time_s"] = wall_time_s;
  doc["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  write_json_file(out_dir + "/manifest.json", doc);
}

void write_chain_checkpoint(
    const std::string& path_prefix, const sampler::Chain& chain,
    const std::vector<std::pair<std::size_t, std::size_t>>& layout,
    const nlohmann::json& meta) {
  std::ofstream bin(path_prefix + ".bin", std::ios::binary);
  if (!bin) {
    throw ConfigError("cannot open checkpoint '" + path_prefix + ".bin'");
  }
  for (const auto& sample : chain.samples) {
    bin.write(reinterpret_cast<const char*>(sample.data()),
              static_cast<std::streamsize>(sample.size() * sizeof(double)));
  }

  nlohmann::json side = meta;
  side["samples"] = chain.samples.size();
  side["param_dim"] =
      chain.samples.empty() ? 0 : chain.samples.front().size();
  side["sample_epochs"] = chain.sample_epochs;
  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& [offset, len] : layout) {
    offsets.push_back({{"offset", offset}, {"length", len}});
  }
  side["layer_offsets"] = offsets;
  write_json_file(path_prefix + ".json", side);
}

void write_trace_csv(const std::string& path, const sampler::Chain& chain) {
  CsvWriter csv(path, {"epoch", "step_size", "energy_estimate", "grad_norm"});
  for (const auto& row : chain.trace) {
    csv.row({CsvWriter::cell(row.epoch), CsvWriter::cell(row.step_size),
             CsvWriter::cell(row.energy_estimate),
             CsvWriter::cell(row.grad_norm)});
  }
}

}  // namespace tempair::cli
