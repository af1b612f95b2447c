#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rlap/envs.hpp"
#include "rlap/instances.hpp"
#include "rlap/neuralnet.hpp"

namespace rlap {

struct Experience {
  Observation obs;
  ActionMask mask;
  std::size_t action = 0;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value = 0.0;       // V(X_t)
  double next_value = 0.0;  // V(X_{t+1}); 0 at the terminal step
  double advantage = 0.0;
  double return_target = 0.0;
};

/// Bounded FIFO; pushing into a full buffer evicts the oldest record.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity = 1000) : capacity_(capacity) {}

  void push(Experience e);
  void clear() noexcept { records_.clear(); }

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return records_.empty(); }
  const Experience& operator[](std::size_t k) const { return records_[k]; }
  Experience& operator[](std::size_t k) { return records_[k]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  std::size_t capacity_;
  std::deque<Experience> records_;
};

/// What advances the learning-rate decay: every Adam step (one per batch) or
/// every update round (one per update_policy call).
enum class DecayClock { kBatch, kUpdate };
std::string to_string(DecayClock c);
DecayClock parse_decay_clock(const std::string& text);

struct TrainConfig {
  double gamma = 0.99;
  double epsilon = 0.2;
  double lr = 1e-4;
  double lr_decay = 1e-3;
  DecayClock decay_clock = DecayClock::kBatch;
  std::size_t epochs_per_episode = 20;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 1000;
  std::size_t episodes = 0;
  std::vector<RngSeed> eval_seeds;
  /// Forwarded to RewardConfig; unset means the instance-derived default.
  std::optional<double> worker_penalty;
  bool depot_return = true;
  RngSeed master_seed = 0;

  bool normalize_advantages = true;
  bool clear_buffer = false;
  /// Episodes collected between policy updates; 0 updates whenever the
  /// buffer is full.
  std::size_t update_interval = 1;
  double entropy_coef = 0.0;
  /// Multiplies rewards before they reach the learner; 0 picks
  /// 1 / (mean |return| of uniformly random rollouts on the base instance).
  double reward_scale = 0.0;
  std::size_t eval_interval = 50;
  std::size_t filters = 128;
  std::size_t hidden = 128;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Advantage {
  double advantage = 0.0;
  double return_target = 0.0;
};

/// r + gamma * V_next - V, with return target r + gamma * V_next.
Advantage one_step_advantage(double reward, double value, double next_value, double gamma);

enum class ActMode { kSample, kGreedy };

/// Draws from the masked action distribution (or takes its argmax, lowest
/// index on ties). The result is always allowed by `mask`.
std::size_t select_action(const nn::ActorOutput& out, const ActionMask& mask, ActMode mode, Rng& rng);

std::size_t act(const nn::PolicyParams& params, const EnvState& state, const AnyInstance& inst, ActMode mode, Rng& rng);

struct Episode {
  std::vector<Experience> steps;
  std::vector<Preassignment> preassigned;
  EnvState final_state;
  /// Sum of all unscaled rewards, pre-assignments included.
  double total_reward = 0.0;
};

/// reset -> pre-assignment -> {mask, actor, act, step} until done. Values and
/// log-probabilities are recorded; advantages are filled with `gamma`.
Episode collect_episode(const nn::PolicyParams& params, const AnyInstance& inst, const RewardConfig& rcfg, Rng& rng,
                        ActMode mode = ActMode::kSample, double reward_scale = 1.0, double gamma = 0.99);

/// Fills advantage/return_target of every step from reward/value/next_value.
void compute_advantages(std::vector<Experience>& steps, double gamma);

struct Optimizers {
  nn::Adam actor;
  nn::Adam critic;
  std::size_t steps = 0;   // Adam steps applied so far
  std::size_t rounds = 0;  // update_policy calls so far
  DecayClock clock = DecayClock::kBatch;

  Optimizers() = default;
  Optimizers(const nn::PolicyParams& params, const TrainConfig& cfg);
};

struct UpdateStats {
  std::vector<double> actor_loss;   // per epoch, mean over batches
  std::vector<double> critic_loss;  // per epoch
  double clip_fraction = 0.0;       // mean over all batches
  std::size_t updates = 0;
};

/// `epochs_per_episode` passes over the buffer in shuffled batches of at most
/// `batch_size`, each followed by one Adam step on each stack.
UpdateStats update_policy(nn::PolicyParams& params, Optimizers& opt, const RolloutBuffer& buffer,
                          const TrainConfig& cfg, Rng& rng);

using InstanceSource = std::function<AnyInstance(RngSeed)>;

struct TrainRecord {
  std::size_t episode = 0;
  double mean_reward = 0.0;   // unscaled episode return
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
  std::optional<double> eval_objective;  // mean over eval seeds, lower is better
  std::optional<double> eval_gap;        // vs the reference objective when provided
};

struct TrainHooks {
  /// Objective of a reference solver on an eval instance (lower is better).
  std::function<double(const AnyInstance&)> reference;
  std::function<void(const TrainRecord&)> on_record;
};

struct TrainedPolicy {
  nn::PolicyParams params;
  RewardConfig reward;
  double reward_scale = 1.0;
  std::vector<TrainRecord> log;
  std::optional<std::size_t> best_episode;
  std::optional<double> best_eval;
};

/// Objective of a finished episode, lower is better: -(sum of rewards).
double episode_objective(const Episode& ep);

/// Greedy-decodes every eval instance and returns the mean objective.
double evaluate_policy(const nn::PolicyParams& params, const std::vector<AnyInstance>& instances, const RewardConfig& rcfg);

TrainedPolicy train(const InstanceSource& source, const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace rlap
