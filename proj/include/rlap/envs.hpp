#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rlap/instances.hpp"

namespace rlap {

/// Dynamic state shared by the three environments. "Tasks" and "workers"
/// stand for items/bins and customers/vehicles in the other two problems.
struct EnvState {
  std::vector<TimeUnits> remaining_efforts;
  std::vector<TimeUnits> remaining_capacities;
  std::size_t clock = 0;
  std::optional<std::size_t> last_completed;
  std::size_t current_task = 0;  // == task count once done
  std::vector<bool> used_workers;
  /// Assignment cost (ap), packed value (bin) or travelled distance (vrp).
  double cumulative_cost = 0.0;
  bool done = false;

  /// Entity -> worker index; -1 while pending or when skipped.
  std::vector<int> assignment;
  std::vector<bool> skipped;      // bin: items no bin could take
  std::vector<Point> positions;   // vrp: where each vehicle currently is

  std::size_t workers_used() const;
  bool operator==(const EnvState&) const = default;
};

struct ActionMask {
  std::vector<bool> allowed;

  std::size_t size() const noexcept { return allowed.size(); }
  bool operator[](std::size_t j) const { return allowed[j]; }
  std::size_t allowed_count() const;
  bool operator==(const ActionMask&) const = default;
};

struct StepInfo {
  double cost = 0.0;           // ap cost, bin value or vrp leg distance
  bool activated = false;      // the action opened a fresh worker
  bool skipped = false;        // bin only
  double depot_return = 0.0;   // vrp only, charged on the final step
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct RewardConfig {
  /// Penalty for opening a previously unused worker/bin/vehicle.
  double worker_penalty = 0.0;
  /// VRP: charge every used vehicle's return leg when the episode ends.
  bool depot_return = true;

  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

/// round(mean cost entry) for ap, round(mean item value) for bin, 0 for vrp.
RewardConfig default_reward_config(const AnyInstance& inst);

struct Preassignment {
  std::size_t task = 0;
  std::size_t worker = 0;
  StepOutcome outcome;
};

EnvState reset(const ApInstance& inst);
EnvState reset(const BinInstance& inst);
EnvState reset(const VrpInstance& inst);
EnvState reset(const AnyInstance& inst);

/// Commits every entity whose effort equals the largest capacity to a fresh
/// eligible worker (cheapest for ap, lowest index otherwise) before decoding.
std::vector<Preassignment> priority_preassign(EnvState& state, const AnyInstance& inst, const RewardConfig& rcfg);

/// Throws DeadEndError when nothing is allowed.
ActionMask action_mask(const EnvState& state, const ApInstance& inst);
ActionMask action_mask(const EnvState& state, const BinInstance& inst);
ActionMask action_mask(const EnvState& state, const VrpInstance& inst);
ActionMask action_mask(const EnvState& state, const AnyInstance& inst);

/// Same rules, returning an all-false mask instead of throwing.
ActionMask feasible_actions(const EnvState& state, const AnyInstance& inst);

/// Throws InvalidActionError for masked actions or a finished episode.
StepOutcome step(EnvState& state, std::size_t action, const ApInstance& inst, const RewardConfig& rcfg);
StepOutcome step(EnvState& state, std::size_t action, const BinInstance& inst, const RewardConfig& rcfg);
StepOutcome step(EnvState& state, std::size_t action, const VrpInstance& inst, const RewardConfig& rcfg);
StepOutcome step(EnvState& state, std::size_t action, const AnyInstance& inst, const RewardConfig& rcfg);

/// Bin packing: marks the current item unplaced (reward 0). Only legal when
/// no bin can take it.
StepOutcome skip_item(EnvState& state, const BinInstance& inst);

/// Skips every leading bin item that no bin can take. No-op for ap/vrp.
void settle(EnvState& state, const AnyInstance& inst);

struct Observation {
  std::vector<double> seq;        // efforts ‖ capacities, divided by the max capacity
  std::array<double, 2> scalars{};  // clock / n, (last completed + 1) / (n + 1)

  bool operator==(const Observation&) const = default;
};

Observation encode_observation(const EnvState& state, const AnyInstance& inst);

}  // namespace rlap
