#pragma once

#include <optional>
#include <string>

#include "rlap/envs.hpp"
#include "rlap/instances.hpp"
#include "rlap/neuralnet.hpp"
#include "rlap/ppo.hpp"

namespace rlap {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A trained policy plus everything needed to decode with it. The base
/// instance fixes the family: static data (costs, values, coordinates) the
/// policy has learned implicitly, with dynamic fields resampled per seed.
struct Checkpoint {
  ProblemKind kind = ProblemKind::kAp;
  std::size_t n = 0;
  std::size_t m = 0;
  AnyInstance base;
  RewardConfig reward;
  TrainConfig train;
  GenConfig gen;
  double reward_scale = 1.0;
  std::optional<std::size_t> best_episode;
  std::optional<double> best_eval;
  nn::PolicyParams params;

  bool operator==(const Checkpoint&) const = default;
};

/// "RLAPCKPT", u32 version, u32 header length, JSON header, then the actor and
/// critic as (u64 count, little-endian float64 values) in declared layer order.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the raw parameter bytes; logged to show which weights ran.
std::uint64_t parameter_hash(const nn::PolicyParams& params);
std::string hex64(std::uint64_t v);

}  // namespace rlap
