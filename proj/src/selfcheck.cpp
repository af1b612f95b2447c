#include "rlap/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rlap/checkpoint.hpp"
#include "rlap/ppo.hpp"

namespace rlap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

// Uniformly random allowed action; nullopt when none.
std::optional<std::size_t> random_action(const ActionMask& mask, Rng& rng) {
  const auto count = mask.allowed_count();
  if (count == 0) return std::nullopt;
  auto r = pick(rng, 0, count - 1);
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j] && r-- == 0) return j;
  return std::nullopt;
}

// A random reachable, non-terminal state: reset, pre-assign, then a random
// number of random feasible steps. nullopt if the walk ended the episode.
std::optional<EnvState> random_state(const AnyInstance& inst, Rng& rng) {
  EnvState st = reset(inst);
  const RewardConfig rcfg = default_reward_config(inst);
  priority_preassign(st, inst, rcfg);
  settle(st, inst);
  const std::size_t walk = pick(rng, 0, entity_count(inst));
  for (std::size_t s = 0; s < walk && !st.done; ++s) {
    const auto a = random_action(feasible_actions(st, inst), rng);
    if (!a) return std::nullopt;
    step(st, *a, inst, rcfg);
  }
  if (st.done || feasible_actions(st, inst).allowed_count() == 0) return std::nullopt;
  return st;
}

GenConfig random_small_config(Rng& rng) {
  GenConfig g;
  g.capacity_default = static_cast<TimeUnits>(pick(rng, 4, 15));
  g.effort_cap = static_cast<TimeUnits>(pick(rng, 1, static_cast<std::size_t>(g.capacity_default)));
  g.worker_surplus = pick(rng, 0, 2);
  g.class_count = pick(rng, 1, 2);
  g.cost_range = {1, 50};
  g.coord_range = {0.0, 100.0};
  return g;
}

double default_lambda(const AnyInstance& inst) { return default_reward_config(inst).worker_penalty; }

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

// ---------------------------------------------------------------------------

GradCheckCase make_gradcheck_case(RngSeed seed, std::size_t max_parameters) {
  Rng rng(seed);
  GradCheckCase c;
  for (int attempt = 0;; ++attempt) {
    const std::size_t n = pick(rng, 2, 4);
    GenConfig g;
    g.worker_surplus = pick(rng, 0, 2);
    const auto kind = static_cast<ProblemKind>(pick(rng, 0, 2));
    const AnyInstance inst = generate_instance(kind, n, rng.next_u64(), g);
    const std::size_t m = action_count(inst);
    const std::size_t filters = pick(rng, 1, 4);
    const std::size_t hidden = pick(rng, 2, 8);
    nn::PolicyParams params(n + m, m, filters, hidden);
    if (params.size() > max_parameters) continue;
    params.initialize(rng.next_u64());
    // Non-zero biases keep pre-activations away from exact ReLU kinks.
    for (auto* stack : {&params.actor, &params.critic})
      for (std::size_t layer = 0; layer < nn::LayerStack::kLayerCount; ++layer)
        for (auto& b : stack->bias(layer)) b = rng.uniform(-0.5, 0.5);
    for (auto& w : params.actor.weights(nn::LayerStack::kHead)) w *= 50.0;  // undo the small head init

    const std::size_t batch = pick(rng, 1, 6);
    c.observations.clear();
    c.masks.clear();
    std::vector<std::size_t> actions;
    for (std::size_t tries = 0; c.observations.size() < batch && tries < 50; ++tries) {
      auto st = random_state(inst, rng);
      if (!st) continue;
      c.observations.push_back(encode_observation(*st, inst));
      c.masks.push_back(feasible_actions(*st, inst));
      actions.push_back(*random_action(c.masks.back(), rng));
    }
    if (c.observations.empty()) {
      if (attempt > 100) throw InvariantError("could not draw gradcheck states");
      continue;
    }
    c.params = std::move(params);
    c.loss.epsilon = rng.uniform(0.1, 0.3);
    c.loss.entropy_coef = rng.uniform01() < 0.5 ? 0.0 : rng.uniform(0.0, 0.05);
    c.batch.clear();
    for (std::size_t k = 0; k < c.observations.size(); ++k) {
      nn::Sample s;
      s.obs = &c.observations[k];
      s.mask = &c.masks[k];
      s.action = actions[k];
      const auto out = nn::actor_forward(c.params, c.observations[k], c.masks[k]);
      s.log_prob_old = out.log_probs[s.action] + rng.uniform(-0.4, 0.4);
      s.advantage = rng.uniform(-2.0, 2.0);
      s.return_target = rng.uniform(-2.0, 2.0);
      c.batch.push_back(s);
    }
    return c;
  }
}

GradSuiteResult run_gradcheck_suite(std::size_t pairs, RngSeed seed, const nn::GradCheckConfig& check) {
  const auto t0 = std::chrono::steady_clock::now();
  GradSuiteResult r;
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto c = make_gradcheck_case(derive_seed(seed, p));
    const auto rep = nn::finite_difference_check(c.params, c.batch, c.loss, check);
    ++r.pairs;
    r.max_parameters = std::max(r.max_parameters, c.params.size());
    r.max_relative_error = std::max(r.max_relative_error, rep.max_relative_error);
    r.refined_steps += rep.refined_steps;
    r.unresolved_kinks += rep.unresolved_kinks;
    if (!rep.passed) ++r.failures;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------

MaskSuiteResult run_mask_suite(std::size_t states, std::size_t samples, RngSeed seed) {
  Rng rng(seed);
  MaskSuiteResult r;
  const std::size_t per_state = states == 0 ? 0 : (samples + states - 1) / states;
  std::optional<nn::PolicyParams> policy;
  std::size_t policy_shape = 0;
  while (r.states < states) {
    const auto kind = static_cast<ProblemKind>(pick(rng, 0, 2));
    const std::size_t n = pick(rng, 1, 20);
    GenConfig g;
    g.worker_surplus = pick(rng, 0, 3);
    const AnyInstance inst = generate_instance(kind, n, rng.next_u64(), g);
    const std::size_t m = action_count(inst);
    if (!policy || policy_shape != (n + m) * 1000 + m || rng.uniform01() < 0.05) {
      policy.emplace(n + m, m, 8, 16);
      policy->initialize(rng.next_u64());
      // Sharper logits than the small-head initialization gives.
      for (auto& w : policy->actor.weights(nn::LayerStack::kHead)) w *= rng.uniform(1.0, 500.0);
      policy_shape = (n + m) * 1000 + m;
    }
    for (int draws = 0; draws < 4 && r.states < states; ++draws) {
      const auto st = random_state(inst, rng);
      if (!st) continue;
      const auto mask = action_mask(*st, inst);
      const auto out = nn::actor_forward(*policy, encode_observation(*st, inst), mask);
      double sum = 0.0;
      for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j] && out.probs[j] != 0.0) ++r.masked_leaks;
        sum += out.probs[j];
      }
      r.worst_sum_error = std::max(r.worst_sum_error, std::abs(sum - 1.0));
      if (std::abs(sum - 1.0) > 1e-9) ++r.bad_sums;
      for (std::size_t s = 0; s < per_state && r.samples < samples; ++s) {
        const auto a = select_action(out, mask, ActMode::kSample, rng);
        if (a >= mask.size() || !mask[a]) ++r.bad_samples;
        ++r.samples;
      }
      ++r.states;
    }
  }
  return r;
}

EpisodeSuiteResult run_episode_suite(std::size_t episodes, std::size_t max_n, RngSeed seed) {
  Rng rng(seed);
  EpisodeSuiteResult r;
  while (r.episodes < episodes) {
    const std::size_t n = pick(rng, 0, max_n);
    GenConfig g;
    g.class_count = pick(rng, 1, 3);
    const ApInstance inst = generate_ap_instance(n, rng.next_u64(), g);
    RewardConfig rcfg;  // lambda = 0
    EnvState st = reset(inst);
    std::int64_t effort_total = 0;
    std::int64_t capacity_total = 0;
    for (const auto& t : inst.tasks) effort_total += t.effort;
    for (const auto& w : inst.workers) capacity_total += w.capacity;

    double reward_sum = 0.0;
    const auto pre = priority_preassign(st, inst, rcfg);
    for (const auto& p : pre) reward_sum += p.outcome.reward;
    std::size_t steps = 0;
    bool dead_end = false;
    auto check_state = [&] {
      std::int64_t eff = 0;
      std::int64_t cap = 0;
      for (auto e : st.remaining_efforts) {
        if (e < 0) ++r.negative_values;
        eff += e;
      }
      for (auto c : st.remaining_capacities) {
        if (c < 0) ++r.negative_values;
        cap += c;
      }
      // Whatever left the task pool landed on a worker.
      if (effort_total - eff != capacity_total - cap) ++r.conservation_errors;
    };
    check_state();
    while (!st.done) {
      const auto a = random_action(feasible_actions(st, inst), rng);
      if (!a) {
        dead_end = true;
        break;
      }
      reward_sum += step(st, *a, inst, rcfg).reward;
      ++steps;
      check_state();
    }
    if (dead_end) continue;  // uniform random play can strand a task; not an episode
    if (steps != n - pre.size()) ++r.length_errors;
    if (!close(-reward_sum, st.cumulative_cost)) ++r.reward_errors;
    ++r.episodes;
  }
  return r;
}

// ---------------------------------------------------------------------------

Solution brute_force_ap(const ApInstance& inst, double lambda) {
  const std::size_t n = inst.tasks.size();
  const std::size_t m = inst.workers.size();
  std::vector<int> cur(n, 0);
  double best = kInf;
  std::vector<int> best_assignment;
  if (n == 0) best = 0.0;
  while (n > 0 && m > 0) {
    std::vector<std::int64_t> load(m, 0);
    bool ok = true;
    double cost = 0.0;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const auto j = static_cast<std::size_t>(cur[i]);
      const auto& elig = inst.tasks[i].eligibility;
      ok = std::find(elig.begin(), elig.end(), inst.workers[j].worker_class) != elig.end();
      load[j] += inst.tasks[i].effort;
      cost += static_cast<double>(inst.cost[i][j]);
    }
    for (std::size_t j = 0; j < m && ok; ++j) ok = load[j] <= inst.workers[j].capacity;
    if (ok) {
      for (std::size_t j = 0; j < m; ++j)
        if (load[j] > 0) cost += lambda;
      if (cost < best) {
        best = cost;
        best_assignment = cur;
      }
    }
    std::size_t i = 0;
    while (i < n && ++cur[i] == static_cast<int>(m)) cur[i++] = 0;
    if (i == n) break;
  }
  if (!std::isfinite(best)) throw InfeasibleError("brute_force_ap: infeasible");
  Solution s;
  s.assignment = n == 0 ? std::vector<int>{} : best_assignment;
  s.optimal = true;
  RewardConfig r;
  r.worker_penalty = lambda;
  return recompute(inst, std::move(s), r);
}

Solution brute_force_bin(const BinInstance& inst) {
  const std::size_t n = inst.items.size();
  const std::size_t m = inst.bins.size();
  std::vector<int> cur(n, -1);  // -1 = unpacked
  CostValue best_value = -1;
  std::size_t best_bins = 0;
  std::vector<int> best_assignment;
  while (true) {
    std::vector<std::int64_t> load(m, 0);
    bool ok = true;
    CostValue value = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (cur[i] >= 0) {
        load[static_cast<std::size_t>(cur[i])] += inst.items[i].weight;
        value += inst.items[i].value;
      }
    std::size_t bins = 0;
    for (std::size_t j = 0; j < m; ++j) {
      ok = ok && load[j] <= inst.bins[j];
      bins += load[j] > 0 ? 1 : 0;
    }
    if (ok && (value > best_value || (value == best_value && bins < best_bins))) {
      best_value = value;
      best_bins = bins;
      best_assignment = cur;
    }
    std::size_t i = 0;
    while (i < n && ++cur[i] == static_cast<int>(m)) cur[i++] = -1;
    if (i == n) break;
  }
  Solution s;
  s.assignment = best_assignment;
  s.optimal = true;
  return recompute(inst, std::move(s), {});
}

Solution brute_force_vrp(const VrpInstance& inst, double lambda, bool depot_return) {
  const std::size_t n = inst.customers.size();
  const std::size_t m = inst.vehicles.size();
  // Best visit order of every customer subset, by trying every permutation.
  const std::size_t full = std::size_t{1} << n;
  std::vector<double> tour(full, 0.0);
  std::vector<std::vector<std::size_t>> order(full);
  for (std::size_t s = 1; s < full; ++s) {
    std::vector<std::size_t> perm;
    for (std::size_t c = 0; c < n; ++c)
      if (s >> c & 1U) perm.push_back(c);
    double best = kInf;
    do {
      double d = distance(inst.depot, inst.customers[perm.front()].location);
      for (std::size_t k = 1; k < perm.size(); ++k)
        d += distance(inst.customers[perm[k - 1]].location, inst.customers[perm[k]].location);
      if (depot_return) d += distance(inst.customers[perm.back()].location, inst.depot);
      if (d < best) {
        best = d;
        order[s] = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    tour[s] = best;
  }
  std::vector<int> cur(n, 0);
  double best = n == 0 ? 0.0 : kInf;
  std::vector<int> best_assignment(n, 0);
  while (n > 0 && m > 0) {
    std::vector<std::size_t> subset(m, 0);
    std::vector<std::int64_t> load(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      subset[static_cast<std::size_t>(cur[i])] |= std::size_t{1} << i;
      load[static_cast<std::size_t>(cur[i])] += inst.customers[i].demand;
    }
    bool ok = true;
    double d = 0.0;
    for (std::size_t v = 0; v < m && ok; ++v) {
      ok = load[v] <= inst.vehicles[v];
      if (subset[v]) d += tour[subset[v]] + lambda;
    }
    if (ok && d < best) {
      best = d;
      best_assignment = cur;
    }
    std::size_t i = 0;
    while (i < n && ++cur[i] == static_cast<int>(m)) cur[i++] = 0;
    if (i == n) break;
  }
  if (!std::isfinite(best)) throw InfeasibleError("brute_force_vrp: infeasible");
  Solution s;
  s.assignment = best_assignment;
  s.routes.assign(m, {});
  for (std::size_t v = 0; v < m; ++v) {
    std::size_t subset = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (best_assignment[i] == static_cast<int>(v)) subset |= std::size_t{1} << i;
    if (subset) s.routes[v] = order[subset];
  }
  s.optimal = true;
  RewardConfig r;
  r.worker_penalty = lambda;
  r.depot_return = depot_return;
  return recompute(inst, std::move(s), r);
}

OracleSuiteResult run_oracle_suite(ProblemKind kind, std::size_t instances, std::size_t max_n, RngSeed seed) {
  Rng rng(seed);
  OracleSuiteResult r;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = pick(rng, 0, max_n);
    const GenConfig g = random_small_config(rng);
    const AnyInstance inst = generate_instance(kind, n, rng.next_u64(), g);
    const bool use_lambda = rng.uniform01() < 0.5;
    const double lambda = use_lambda ? default_lambda(inst) : 0.0;
    const bool depot_return = rng.uniform01() < 0.8;
    std::string verdict;
    auto run = [&](auto&& solver) -> std::optional<Solution> {
      try {
        return solver();
      } catch (const InfeasibleError&) {
        return std::nullopt;
      }
    };
    std::optional<Solution> exact;
    std::optional<Solution> brute;
    RewardConfig rcfg;
    if (kind == ProblemKind::kAp) {
      const auto& ap = std::get<ApInstance>(inst);
      rcfg.worker_penalty = lambda;
      exact = run([&] { return exact_ap(ap, lambda); });
      brute = run([&] { return brute_force_ap(ap, lambda); });
    } else if (kind == ProblemKind::kBin) {
      const auto& bin = std::get<BinInstance>(inst);
      exact = run([&] { return exact_bin(bin); });
      brute = run([&] { return brute_force_bin(bin); });
    } else {
      const auto& vrp = std::get<VrpInstance>(inst);
      const double vl = use_lambda ? 100.0 : 0.0;
      rcfg.worker_penalty = vl;
      rcfg.depot_return = depot_return;
      exact = run([&] { return exact_vrp(vrp, vl, depot_return); });
      brute = run([&] { return brute_force_vrp(vrp, vl, depot_return); });
    }
    ++r.instances;
    if (exact.has_value() != brute.has_value()) {
      verdict = "feasibility disagrees";
    } else if (exact) {
      try {
        validate_solution(inst, *exact, rcfg);
      } catch (const InvariantError& e) {
        verdict = std::string("exact solution invalid: ") + e.what();
      }
      if (!close(exact->objective, brute->objective)) verdict = "objective differs";
      if (kind == ProblemKind::kBin && exact->workers_used != brute->workers_used) verdict = "bins used differ";
    }
    if (!verdict.empty()) {
      if (r.mismatches++ == 0)
        r.first_mismatch = to_string(kind) + " instance " + std::to_string(k) + " (n=" + std::to_string(n) + "): " + verdict;
    }
  }
  return r;
}

OracleSuiteResult run_dominance_suite(std::size_t instances, std::size_t max_n, RngSeed seed) {
  Rng rng(seed);
  OracleSuiteResult r;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = pick(rng, 0, max_n);
    GenConfig g;
    g.class_count = pick(rng, 1, 2);
    const ApInstance inst = generate_ap_instance(n, rng.next_u64(), g);
    const double lambda = rng.uniform01() < 0.5 ? default_lambda(inst) : 0.0;
    ++r.instances;
    std::optional<Solution> greedy;
    try {
      greedy = greedy_ap(inst, lambda);
    } catch (const InfeasibleError&) {
    }
    std::optional<Solution> exact;
    try {
      exact = exact_ap(inst, lambda);
    } catch (const InfeasibleError&) {
    }
    std::string verdict;
    if (greedy && !exact) verdict = "exact infeasible where greedy succeeded";
    if (greedy && exact && exact->objective > greedy->objective + 1e-9) verdict = "exact worse than greedy";
    if (!verdict.empty() && r.mismatches++ == 0) r.first_mismatch = "instance " + std::to_string(k) + ": " + verdict;
  }
  return r;
}

// ---------------------------------------------------------------------------

bool run_selftest(std::ostream& log) {
  bool ok = true;
  auto line = [&](const std::string& name, bool pass, const std::string& detail) {
    log << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    ok = ok && pass;
  };

  const auto mask = run_mask_suite(1000, 10000, 11);
  line("mask soundness", mask.passed(),
       std::to_string(mask.states) + " states, " + std::to_string(mask.samples) + " samples, worst sum error " +
           std::to_string(mask.worst_sum_error));

  const auto eps = run_episode_suite(100, 50, 12);
  line("episode invariants", eps.passed(), std::to_string(eps.episodes) + " episodes");

  for (auto kind : {ProblemKind::kAp, ProblemKind::kBin, ProblemKind::kVrp}) {
    const auto o = run_oracle_suite(kind, 20, 5, 13);
    line("exact_" + to_string(kind) + " vs brute force", o.passed(),
         std::to_string(o.instances) + " instances" + (o.passed() ? "" : "; " + o.first_mismatch));
  }
  const auto dom = run_dominance_suite(50, 10, 14);
  line("exact_ap <= greedy_ap", dom.passed(), std::to_string(dom.instances) + " instances");

  std::size_t roundtrip_errors = 0;
  Rng rng(15);
  for (int k = 0; k < 100; ++k) {
    const auto kind = static_cast<ProblemKind>(k % 3);
    GenConfig g;
    g.class_count = static_cast<std::size_t>(1 + k % 3);
    const auto inst = generate_instance(kind, static_cast<std::size_t>(rng.uniform_int(0, 20)), rng.next_u64(), g);
    if (!(parse_instance(serialize_instance(inst)) == inst)) ++roundtrip_errors;
  }
  line("instance roundtrip", roundtrip_errors == 0, "100 instances");

  Checkpoint ckpt;
  ckpt.base = generate_ap_instance(4, 3);
  ckpt.n = 4;
  ckpt.m = 6;
  ckpt.reward = default_reward_config(ckpt.base);
  ckpt.reward_scale = 1.0 / 3.0;
  ckpt.params = nn::PolicyParams(10, 6, 4, 8);
  ckpt.params.initialize(16);
  const std::string bytes = encode_checkpoint(ckpt);
  line("checkpoint roundtrip", decode_checkpoint(bytes) == ckpt && encode_checkpoint(decode_checkpoint(bytes)) == bytes,
       std::to_string(bytes.size()) + " bytes");

  const auto adv = one_step_advantage(-40.0, -150.0, -100.0, 0.99);
  line("one-step advantage", adv.advantage == 11.0 && adv.return_target == -139.0, "r=-40, V=-150, V'=-100");

  const auto grad = run_gradcheck_suite(5, 17);
  line("gradient check", grad.passed(), "max rel error " + std::to_string(grad.max_relative_error));
  return ok;
}

}  // namespace rlap
