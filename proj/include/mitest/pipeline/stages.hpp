// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "mitest/predict/fault_predictor.hpp"
#include "mitest/rv/monitor.hpp"

namespace mitest::pipeline {

// Missing or unparseable inputs: the CLI maps this to exit status 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A stage computation failed: the CLI maps this to exit status 1.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what) {}
};

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
// Canonical artifact form: pretty-printed with sorted keys, trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

struct PipelineConfig {
  std::filesystem::path sim_config_path;
  std::filesystem::path graph_path;
  std::filesystem::path workload_path;
  std::uint64_t seed = 0;
  double lambda = 0.8;
  std::size_t top_k = 3;
  std::optional<double> threshold;  // overrides top_k when present
  std::string strategy = "profile";  // uniform | direct | profile
  std::map<std::string, std::filesystem::path> direct_tables;  // per service
  std::size_t tests_per_service = 20;
  std::int64_t window_ms = 0;
  double alpha = 1.0;
  std::size_t iterations = 200;
  std::string scoring = "profile";  // profile | stationary
};

// Relative paths inside the config resolve against base_dir.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);

// A trace fails when the monitor saw an illegal transition or a broken data
// predicate; a merely incomplete trace is a truncation artifact, not a fail.
predict::Verdict verdict_of(const rv::CheckResult& result);

// Runs simulate -> profile -> mcum -> testgen -> prioritize -> predict ->
// monitor -> allocate, writing every artifact under out_dir. Throws
// InputError for unreadable inputs and StageError for stage failures.
void run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                  std::ostream& diag);

}  // namespace mitest::pipeline
