#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "maxcorr/data.hpp"
#include "maxcorr/trainer.hpp"

namespace maxcorr {

struct DataSection {
  std::optional<std::filesystem::path> path;
  std::optional<SyntheticSpec> synthetic;
};

struct EvalSection {
  std::size_t n_splits = 1;
  SplitRatios ratios;
  std::size_t split_index = 0;
  std::filesystem::path report = "report.csv";
};

/// One run: data source, model, optimization and evaluation settings.
/// Relative paths are taken relative to the working directory.
struct RunConfig {
  DataSection data;
  ModelConfig model;
  TrainConfig train;
  EvalSection eval;
  std::filesystem::path output_dir = "run";

  void validate() const;
};

/// Strict parse: unknown keys and wrongly typed values raise ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully populated form of the config; parse(to_json(c)) reproduces c.
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace maxcorr
