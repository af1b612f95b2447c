#include "rlap/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rlap {

void RolloutBuffer::push(Experience e) {
  if (capacity_ == 0) return;
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(e));
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(lr > 0.0) || !(lr_decay >= 0.0)) throw ConfigError("lr must be > 0 and lr_decay >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (worker_penalty && !(*worker_penalty >= 0.0)) throw ConfigError("worker_penalty must be >= 0");
  if (!(reward_scale >= 0.0) || !(entropy_coef >= 0.0)) throw ConfigError("reward_scale and entropy_coef must be >= 0");
  if (filters < 1 || hidden < 1) throw ConfigError("filters and hidden must be >= 1");
}

Advantage one_step_advantage(double reward, double value, double next_value, double gamma) {
  const double target = reward + gamma * next_value;
  return {target - value, target};
}

std::size_t select_action(const nn::ActorOutput& out, const ActionMask& mask, ActMode mode, Rng& rng) {
  std::optional<std::size_t> chosen;
  if (mode == ActMode::kGreedy) {
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j] && (!chosen || out.probs[j] > out.probs[*chosen])) chosen = j;
  } else {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (!mask[j]) continue;
      chosen = j;  // last allowed index absorbs rounding at the top end
      acc += out.probs[j];
      if (u < acc) break;
    }
  }
  if (!chosen) throw DeadEndError("select_action: every action is masked");
  return *chosen;
}

std::size_t act(const nn::PolicyParams& params, const EnvState& state, const AnyInstance& inst, ActMode mode, Rng& rng) {
  const auto mask = action_mask(state, inst);
  return select_action(nn::actor_forward(params, encode_observation(state, inst), mask), mask, mode, rng);
}

void compute_advantages(std::vector<Experience>& steps, double gamma) {
  for (auto& e : steps) {
    const auto a = one_step_advantage(e.reward, e.value, e.next_value, gamma);
    e.advantage = a.advantage;
    e.return_target = a.return_target;
  }
}

Episode collect_episode(const nn::PolicyParams& params, const AnyInstance& inst, const RewardConfig& rcfg, Rng& rng,
                        ActMode mode, double reward_scale, double gamma) {
  Episode ep;
  EnvState s = reset(inst);
  ep.preassigned = priority_preassign(s, inst, rcfg);
  for (const auto& p : ep.preassigned) ep.total_reward += p.outcome.reward;
  settle(s, inst);

  const bool with_values = mode == ActMode::kSample;
  Observation obs = encode_observation(s, inst);
  double value = (with_values && !s.done) ? nn::critic_forward(params, obs) : 0.0;
  while (!s.done) {
    Experience e;
    e.mask = action_mask(s, inst);
    const auto out = nn::actor_forward(params, obs, e.mask);
    e.action = select_action(out, e.mask, mode, rng);
    e.log_prob_old = out.log_probs[e.action];
    const auto outcome = step(s, e.action, inst, rcfg);
    settle(s, inst);
    ep.total_reward += outcome.reward;
    e.reward = outcome.reward * reward_scale;
    e.value = value;
    Observation next = encode_observation(s, inst);
    value = (with_values && !s.done) ? nn::critic_forward(params, next) : 0.0;
    e.next_value = value;
    e.obs = std::move(obs);
    obs = std::move(next);
    ep.steps.push_back(std::move(e));
  }
  compute_advantages(ep.steps, gamma);
  ep.final_state = std::move(s);
  return ep;
}

Optimizers::Optimizers(const nn::PolicyParams& params, const TrainConfig& cfg)
    : actor(params.actor.size(), {cfg.lr, cfg.lr_decay}),
      critic(params.critic.size(), {cfg.lr, cfg.lr_decay}),
      clock(cfg.decay_clock) {}

std::string to_string(DecayClock c) { return c == DecayClock::kBatch ? "batch" : "update"; }

DecayClock parse_decay_clock(const std::string& text) {
  if (text == "batch") return DecayClock::kBatch;
  if (text == "update") return DecayClock::kUpdate;
  throw ConfigError("decay clock must be 'batch' or 'update', got '" + text + "'");
}

UpdateStats update_policy(nn::PolicyParams& params, Optimizers& opt, const RolloutBuffer& buffer, const TrainConfig& cfg,
                          Rng& rng) {
  if (buffer.empty()) throw UsageError("update_policy: empty buffer");
  const std::size_t n = buffer.size();

  std::vector<double> adv(n);
  for (std::size_t k = 0; k < n; ++k) adv[k] = buffer[k].advantage;
  if (cfg.normalize_advantages) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<nn::Sample> samples(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& e = buffer[k];
    samples[k] = {&e.obs, &e.mask, e.action, e.log_prob_old, adv[k], e.return_target};
  }

  UpdateStats stats;
  const nn::LossConfig loss_cfg{cfg.epsilon, cfg.entropy_coef};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::Sample> batch;
  nn::GradientSet grads = params.zeros_like();
  double clip_sum = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_episode; ++epoch) {
    for (std::size_t k = n; k > 1; --k)
      std::swap(order[k - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1))]);
    double actor_sum = 0.0, critic_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(samples[order[k]]);
      const auto rep = nn::evaluate_batch(params, batch, loss_cfg, &grads);
      const std::size_t decay_index = opt.clock == DecayClock::kBatch ? opt.steps : opt.rounds;
      opt.actor.update(params.actor.values(), grads.actor.values(), opt.steps, decay_index);
      opt.critic.update(params.critic.values(), grads.critic.values(), opt.steps, decay_index);
      ++opt.steps;
      ++stats.updates;
      ++batches;
      actor_sum += rep.actor_loss;
      critic_sum += rep.critic_loss;
      clip_sum += rep.clip_fraction;
    }
    stats.actor_loss.push_back(actor_sum / static_cast<double>(batches));
    stats.critic_loss.push_back(critic_sum / static_cast<double>(batches));
  }
  stats.clip_fraction = stats.updates == 0 ? 0.0 : clip_sum / static_cast<double>(stats.updates);
  ++opt.rounds;
  return stats;
}

double episode_objective(const Episode& ep) { return -ep.total_reward; }

double evaluate_policy(const nn::PolicyParams& params, const std::vector<AnyInstance>& instances, const RewardConfig& rcfg) {
  if (instances.empty()) return 0.0;
  Rng unused(0);
  double sum = 0.0;
  for (const auto& inst : instances) sum += episode_objective(collect_episode(params, inst, rcfg, unused, ActMode::kGreedy));
  return sum / static_cast<double>(instances.size());
}

namespace {

// Mean |return| of uniformly random feasible rollouts; sets the reward scale.
double random_return_magnitude(const InstanceSource& source, const RewardConfig& rcfg, RngSeed seed) {
  constexpr int kRollouts = 16;
  Rng rng(seed);
  double sum = 0.0;
  for (int r = 0; r < kRollouts; ++r) {
    const auto inst = source(derive_seed(seed, static_cast<std::uint64_t>(r)));
    EnvState s = reset(inst);
    double total = 0.0;
    for (const auto& p : priority_preassign(s, inst, rcfg)) total += p.outcome.reward;
    settle(s, inst);
    while (!s.done) {
      const auto mask = action_mask(s, inst);
      std::vector<std::size_t> allowed;
      for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) allowed.push_back(j);
      const auto a = allowed[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(allowed.size()) - 1))];
      total += step(s, a, inst, rcfg).reward;
      settle(s, inst);
    }
    sum += std::abs(total);
  }
  return sum / kRollouts;
}

}  // namespace

TrainedPolicy train(const InstanceSource& source, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const RngSeed master = cfg.master_seed;
  const AnyInstance probe = source(derive_seed(master, 0));
  const std::size_t seq_len = entity_count(probe) + action_count(probe);

  TrainedPolicy result;
  result.reward = default_reward_config(probe);
  if (cfg.worker_penalty) result.reward.worker_penalty = *cfg.worker_penalty;
  result.reward.depot_return = cfg.depot_return;
  result.reward.validate();
  if (cfg.reward_scale > 0.0) {
    result.reward_scale = cfg.reward_scale;
  } else {
    const double mag = random_return_magnitude(source, result.reward, derive_seed(master, 1));
    result.reward_scale = mag > 0.0 ? 1.0 / mag : 1.0;
  }

  nn::PolicyParams params(seq_len, action_count(probe), cfg.filters, cfg.hidden);
  params.initialize(derive_seed(master, 2));
  Optimizers opt(params, cfg);
  RolloutBuffer buffer(cfg.buffer_capacity);
  Rng update_rng(derive_seed(master, 3));

  std::vector<AnyInstance> eval_instances;
  std::vector<double> reference;
  for (auto seed : cfg.eval_seeds) {
    eval_instances.push_back(source(seed));
    if (hooks.reference) reference.push_back(hooks.reference(eval_instances.back()));
  }

  auto evaluate = [&](std::size_t episode, TrainRecord& rec) {
    if (eval_instances.empty()) return;
    double objective = 0.0;
    double gap = 0.0;
    Rng unused(0);
    for (std::size_t k = 0; k < eval_instances.size(); ++k) {
      const double obj = episode_objective(collect_episode(params, eval_instances[k], result.reward, unused, ActMode::kGreedy));
      objective += obj;
      if (!reference.empty()) gap += (obj - reference[k]) / std::max(1e-12, std::abs(reference[k]));
    }
    const double count = static_cast<double>(eval_instances.size());
    rec.eval_objective = objective / count;
    if (!reference.empty()) rec.eval_gap = gap / count;
    if (!result.best_eval || *rec.eval_objective < *result.best_eval) {
      result.best_eval = rec.eval_objective;
      result.best_episode = episode;
      result.params = params;
    }
  };

  result.params = params;
  if (cfg.episodes == 0) {
    TrainRecord rec;
    evaluate(0, rec);
    return result;
  }

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    TrainRecord rec;
    rec.episode = ep;
    if (ep == 0) evaluate(0, rec);

    const auto inst = source(derive_seed(master, 1'000'000 + ep));
    Rng rng(derive_seed(master, 2'000'000 + ep));
    auto episode = collect_episode(params, inst, result.reward, rng, ActMode::kSample, result.reward_scale, cfg.gamma);
    rec.mean_reward = episode.total_reward;
    for (auto& e : episode.steps) buffer.push(std::move(e));

    const bool due = cfg.update_interval == 0 ? buffer.size() >= buffer.capacity() : (ep + 1) % cfg.update_interval == 0;
    if (due && !buffer.empty()) {
      const auto stats = update_policy(params, opt, buffer, cfg, update_rng);
      rec.actor_loss = stats.actor_loss.empty() ? 0.0 : stats.actor_loss.back();
      rec.critic_loss = stats.critic_loss.empty() ? 0.0 : stats.critic_loss.back();
      rec.clip_fraction = stats.clip_fraction;
      if (cfg.clear_buffer) buffer.clear();
    }

    const bool last = ep + 1 == cfg.episodes;
    if (cfg.eval_interval > 0 && ((ep + 1) % cfg.eval_interval == 0 || last)) evaluate(ep + 1, rec);
    if (last && eval_instances.empty()) result.params = params;
    if (hooks.on_record) hooks.on_record(rec);
    result.log.push_back(std::move(rec));
  }
  return result;
}

}  // namespace rlap
