#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fanet/backbone.hpp"
#include "fanet/enhance.hpp"
#include "fanet/optim.hpp"
#include "fanet/seg_head.hpp"
#include "fanet/synth.hpp"

namespace fanet::cli {

/// Everything a subcommand needs; serialized as JSON with sections
/// "ablation", "data", "enhance", "head", "model", "paths", "train".
struct RunConfig {
  SceneSpec scene;
  std::size_t n_train = 200;
  std::size_t n_val = 40;
  std::size_t n_test = 60;

  FANetConfig model;
  HeadConfig head;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  EnhanceParams enhance;

  // Run inputs and outputs; empty when unused by the subcommand.
  std::string data_dir;
  std::string out_dir;
  std::string checkpoint;
  std::string input;
  std::string split = "val";
  std::size_t stage = 3;

  /// Cross-section consistency (class counts) plus each section's own rules.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Overlays `j` onto `config`. Unknown sections or keys raise ConfigError
/// naming the offending key; type mismatches raise ConfigError too.
void apply_json(RunConfig& config, const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
/// Pretty-printed, keys sorted, trailing newline.
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace fanet::cli
