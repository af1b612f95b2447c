#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "rlap/envs.hpp"
#include "rlap/instances.hpp"
#include "rlap/ppo.hpp"

namespace rlap {

/// Run-config file: {"kind", "n", "train": {...}, "reward": {...}, "gen": {...}}.
/// Every section and key is optional; unknown keys are rejected.
struct RunConfig {
  std::optional<ProblemKind> kind;
  std::optional<std::size_t> n;
  TrainConfig train;
  GenConfig gen;
};

nlohmann::json to_json(const GenConfig& cfg);
nlohmann::json to_json(const RewardConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

/// Each overlays the keys present in `j` onto `base`.
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {});
RewardConfig reward_config_from_json(const nlohmann::json& j, RewardConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rlap
