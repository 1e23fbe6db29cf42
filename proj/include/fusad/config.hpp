#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "fusad/data.hpp"
#include "fusad/model.hpp"
#include "fusad/training.hpp"

namespace fusad {

// JSON mapping of every configuration record. Readers reject unknown keys and
// wrongly typed values with ConfigError naming the key path.

nlohmann::json to_json(const FusADConfig& config);
FusADConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MaskSpec& mask);
MaskSpec mask_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const WindowSpec& window);
WindowSpec window_spec_from_json(const nlohmann::json& j);

struct DataPaths {
  std::string train;     // series CSV (forecasting/anomaly) or sample CSV (classification)
  std::string test;      // optional separate test file
  std::string manifest;  // optional; defaults to "<train>.manifest" when that file exists
};

struct AnomalyOptions {
  double percentile = 99.0;
  bool point_adjust = true;
};

/// Everything one CLI run needs.
struct RunConfig {
  std::uint64_t seed = 0;
  FusADConfig model;
  MaskSpec mask;
  TrainConfig train;
  WindowSpec window;
  DataPaths data;
  AnomalyOptions anomaly;
  std::string output_dir = "fusad_out";
  /// Model keys that were written explicitly (others may be inferred from the data).
  std::set<std::string> explicit_model_keys;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
/// Parses the file; syntax errors become ConfigError with the file name.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fusad
