#pragma once

// Plain-text run configuration: one "key = value" per line, '#' starts a
// comment. Every tunable default of the pipeline has a key; unknown keys
// are rejected.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearrange/bench.hpp"
#include "rearrange/executor.hpp"
#include "rearrange/planner.hpp"
#include "rearrange/trainer.hpp"

namespace rearrange {

struct RunConfig {
  std::uint64_t seed = 0;
  RelationGeometry geom;
  std::size_t dataset_size = 5000;
  TrainConfig train;
  SamplerConfig infer = SamplerConfig::infer_preset();
  PlanOptions plan;
  ExecConfig exec;
  BenchConfig bench;

  // Bench geometry follows geom.
  BenchConfig bench_config() const;
  void validate() const;  // ConfigError
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

// Every key with its documentation, in file order.
std::vector<ConfigKey> config_keys();

// ConfigError naming the line for unknown keys, malformed lines or bad
// values.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Full key = value listing that parses back to the same config.
std::string to_text(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace rearrange
