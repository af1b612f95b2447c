#include <cmath>

#include "doctest.h"
#include "rlap/ppo.hpp"

using namespace rlap;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.filters = 4;
  cfg.hidden = 8;
  cfg.epochs_per_episode = 2;
  cfg.batch_size = 16;
  cfg.buffer_capacity = 64;
  cfg.eval_interval = 5;
  cfg.master_seed = 3;
  return cfg;
}

InstanceSource ap_source(std::size_t n) {
  const auto base = generate_ap_instance(n, 7);
  return [base](RngSeed seed) { return resample_dynamic(base, seed); };
}

}  // namespace

TEST_CASE("one_step_advantage") {
  const auto a = one_step_advantage(-40, -150, -100, 0.99);
  CHECK(a.advantage == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(a.return_target == doctest::Approx(-139.0).epsilon(1e-12));
  CHECK(one_step_advantage(-40, -40, 0, 0.99).advantage == 0.0);
  CHECK(one_step_advantage(5, 2, 100, 0.0).advantage == 3.0);
}

TEST_CASE("RolloutBuffer is a bounded FIFO") {
  RolloutBuffer buf(3);
  for (int k = 0; k < 5; ++k) {
    Experience e;
    e.reward = k;
    buf.push(e);
  }
  REQUIRE(buf.size() == 3);
  CHECK(buf[0].reward == 2);
  CHECK(buf[2].reward == 4);
  buf.clear();
  CHECK(buf.empty());
}

TEST_CASE("select_action") {
  Rng rng(1);
  nn::ActorOutput out;
  out.probs = {0.2, 0.5, 0.3};
  const ActionMask all{{true, true, true}};
  CHECK(select_action(out, all, ActMode::kGreedy, rng) == 1);
  out.probs = {0.5, 0.5};
  CHECK(select_action(out, {{true, true}}, ActMode::kGreedy, rng) == 0);
  out.probs = {0, 1, 0};
  const ActionMask one{{false, true, false}};
  CHECK(select_action(out, one, ActMode::kGreedy, rng) == 1);
  CHECK(select_action(out, one, ActMode::kSample, rng) == 1);

  out.probs = {0.25, 0, 0.75};
  const ActionMask some{{true, false, true}};
  std::size_t third = 0;
  for (int k = 0; k < 4000; ++k) {
    const auto a = select_action(out, some, ActMode::kSample, rng);
    REQUIRE(a != 1);
    third += a == 2;
  }
  CHECK(third / 4000.0 == doctest::Approx(0.75).epsilon(0.05));
  CHECK_THROWS_AS(select_action(out, {{false, false, false}}, ActMode::kGreedy, rng), DeadEndError);
}

TEST_CASE("collect_episode") {
  const AnyInstance inst = generate_ap_instance(10, 7);
  nn::PolicyParams params(22, 12, 4, 8);
  params.initialize(1);
  const auto rcfg = default_reward_config(inst);

  Rng a(5), b(5);
  const auto ep = collect_episode(params, inst, rcfg, a);
  CHECK(ep.steps.size() + ep.preassigned.size() == 10);
  CHECK(ep.final_state.done);
  const auto again = collect_episode(params, inst, rcfg, b);
  REQUIRE(again.steps.size() == ep.steps.size());
  for (std::size_t k = 0; k < ep.steps.size(); ++k) CHECK(again.steps[k].action == ep.steps[k].action);
  CHECK(again.total_reward == ep.total_reward);
  CHECK(ep.steps.back().next_value == 0.0);
  for (const auto& e : ep.steps) CHECK(e.mask[e.action]);

  SUBCASE("forced pre-assignment shortens the episode") {
    auto ap = std::get<ApInstance>(inst);
    ap.tasks[0].effort = ap.tasks[4].effort = 15;
    Rng r(2);
    const auto ep2 = collect_episode(params, ap, rcfg, r);
    CHECK(ep2.preassigned.size() == 2);
    CHECK(ep2.steps.size() == 8);
  }
  SUBCASE("zero tasks") {
    const AnyInstance empty = generate_ap_instance(0, 1);
    nn::PolicyParams p(2, 2, 2, 2);
    p.initialize(1);
    Rng r(2);
    CHECK(collect_episode(p, empty, {}, r).steps.empty());
  }
  SUBCASE("rewards sum to the negated cost at zero penalty") {
    Rng r(9);
    const auto ep0 = collect_episode(params, inst, {}, r);
    CHECK(-ep0.total_reward == ep0.final_state.cumulative_cost);
    CHECK(episode_objective(ep0) == ep0.final_state.cumulative_cost);
  }
}

TEST_CASE("update_policy") {
  const AnyInstance inst = generate_ap_instance(4, 7);
  nn::PolicyParams params(10, 6, 4, 8);
  params.initialize(2);
  auto cfg = tiny_config();
  Rng rng(1);

  SUBCASE("empty buffer") {
    Optimizers opt(params, cfg);
    CHECK_THROWS_AS(update_policy(params, opt, RolloutBuffer(4), cfg, rng), UsageError);
  }
  SUBCASE("zero advantages leave the actor alone") {
    RolloutBuffer buf(64);
    for (int k = 0; k < 4; ++k) {
      Rng r(static_cast<RngSeed>(k));
      for (auto e : collect_episode(params, inst, {}, r, ActMode::kSample, 0.01).steps) {
        e.advantage = 0;
        buf.push(e);
      }
    }
    const auto before = params;
    Optimizers opt(params, cfg);
    const auto stats = update_policy(params, opt, buf, cfg, rng);
    CHECK(params.actor == before.actor);
    CHECK_FALSE(params.critic == before.critic);
    CHECK(stats.critic_loss.size() == cfg.epochs_per_episode);
    CHECK(stats.critic_loss.back() <= stats.critic_loss.front());
  }
  SUBCASE("positive advantage raises the taken action's probability") {
    Rng r(4);
    auto ep = collect_episode(params, inst, {}, r);
    auto e = ep.steps.front();
    e.advantage = 1.0;
    RolloutBuffer buf(64);
    for (int k = 0; k < 8; ++k) buf.push(e);
    cfg.normalize_advantages = false;
    cfg.lr = 1e-5;
    Optimizers opt(params, cfg);
    double prev = nn::actor_forward(params, e.obs, e.mask).probs[e.action];
    for (int round = 0; round < 5; ++round) {
      update_policy(params, opt, buf, cfg, rng);
      const double now = nn::actor_forward(params, e.obs, e.mask).probs[e.action];
      CHECK(now >= prev);
      prev = now;
    }
  }
  SUBCASE("decay clock") {
    Rng r(4);
    RolloutBuffer buf(64);
    for (auto& e : collect_episode(params, inst, {}, r).steps) buf.push(e);
    Optimizers batch_clock(params, cfg);
    cfg.decay_clock = DecayClock::kUpdate;
    Optimizers round_clock(params, cfg);
    auto p1 = params, p2 = params;
    update_policy(p1, batch_clock, buf, cfg, rng);
    update_policy(p2, round_clock, buf, cfg, rng);
    CHECK(batch_clock.steps == round_clock.steps);
    CHECK(round_clock.rounds == 1);
    CHECK(parse_decay_clock(to_string(DecayClock::kUpdate)) == DecayClock::kUpdate);
    CHECK_THROWS_AS(parse_decay_clock("epoch"), ConfigError);
  }
}

TEST_CASE("an unclipped step is the vanilla policy gradient") {
  // Two-action bandit: with ratio 1 the head-bias gradient is -A (onehot(a) - pi).
  nn::PolicyParams params(3, 2, 2, 3);
  params.initialize(8);
  Observation obs;
  obs.seq = {0.5, 1.0, 1.0};
  obs.scalars = {0.0, 0.0};
  const ActionMask mask{{true, true}};
  const auto out = nn::actor_forward(params, obs, mask);
  const double A = 1.7;
  const std::vector<nn::Sample> batch{{&obs, &mask, 1, out.log_probs[1], A, 0.0}};
  nn::GradientSet g;
  nn::evaluate_batch(params, batch, {}, &g);
  const auto db = g.actor.bias(nn::LayerStack::kHead);
  CHECK(db[0] == doctest::Approx(-A * (0.0 - out.probs[0])).epsilon(1e-12));
  CHECK(db[1] == doctest::Approx(-A * (1.0 - out.probs[1])).epsilon(1e-12));
}

TEST_CASE("train") {
  const auto source = ap_source(4);
  SUBCASE("zero episodes returns the initial policy") {
    auto cfg = tiny_config();
    const auto run = train(source, cfg);
    nn::PolicyParams fresh(10, 6, cfg.filters, cfg.hidden);
    fresh.initialize(derive_seed(cfg.master_seed, 2));
    CHECK(run.params == fresh);
    CHECK(run.log.empty());
  }
  SUBCASE("same seed, same result") {
    auto cfg = tiny_config();
    cfg.episodes = 12;
    cfg.eval_seeds = {1001, 1002};
    const auto a = train(source, cfg);
    const auto b = train(source, cfg);
    CHECK(a.params == b.params);
    REQUIRE(a.log.size() == 12);
    for (std::size_t k = 0; k < a.log.size(); ++k) {
      CHECK(a.log[k].mean_reward == b.log[k].mean_reward);
      CHECK(a.log[k].eval_objective == b.log[k].eval_objective);
    }
    CHECK(a.best_eval.has_value());
    cfg.master_seed = 4;
    CHECK_FALSE(train(source, cfg).params == a.params);
  }
  SUBCASE("buffer-full updates") {
    auto cfg = tiny_config();
    cfg.episodes = 40;
    cfg.update_interval = 0;
    cfg.clear_buffer = true;
    std::size_t updates = 0;
    TrainHooks hooks;
    hooks.on_record = [&](const TrainRecord& r) { updates += r.critic_loss != 0.0; };
    train(source, cfg, hooks);
    // 4 tasks per episode fill the 64-record buffer roughly every 16 episodes.
    CHECK(updates >= 1);
    CHECK(updates <= 3);
  }
  SUBCASE("invalid configuration") {
    auto cfg = tiny_config();
    cfg.gamma = 0;
    CHECK_THROWS_AS(train(source, cfg), ConfigError);
  }
}
