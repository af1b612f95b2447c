#include "rlap/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rlap {

namespace {

EnvState fresh_state(std::vector<TimeUnits> efforts, std::vector<TimeUnits> capacities) {
  EnvState s;
  const auto n = efforts.size();
  s.remaining_efforts = std::move(efforts);
  s.remaining_capacities = std::move(capacities);
  s.used_workers.assign(s.remaining_capacities.size(), false);
  s.assignment.assign(n, -1);
  s.current_task = 0;
  s.done = n == 0;
  return s;
}

void advance_current(EnvState& s) {
  while (s.current_task < s.remaining_efforts.size() && s.remaining_efforts[s.current_task] == 0) ++s.current_task;
  s.done = s.current_task == s.remaining_efforts.size();
}

TimeUnits min_pending(const EnvState& s) {
  TimeUnits best = std::numeric_limits<TimeUnits>::max();
  for (auto e : s.remaining_efforts)
    if (e > 0) best = std::min(best, e);
  return best;
}

// Capacity rules shared by all three problems: (i) capacity > 0, (ii)
// capacity >= smallest pending effort, and capacity >= current effort.
std::vector<bool> capacity_rules(const EnvState& s) {
  std::vector<bool> allowed(s.remaining_capacities.size(), false);
  if (s.done) return allowed;
  const TimeUnits smallest = min_pending(s);
  const TimeUnits current = s.remaining_efforts[s.current_task];
  for (std::size_t j = 0; j < allowed.size(); ++j) {
    const TimeUnits cap = s.remaining_capacities[j];
    allowed[j] = cap > 0 && cap >= smallest && cap >= current;
  }
  return allowed;
}

bool eligible(const TaskSpec& task, const WorkerSpec& worker) {
  return std::find(task.eligibility.begin(), task.eligibility.end(), worker.worker_class) != task.eligibility.end();
}

ActionMask ap_rules(const EnvState& s, const ApInstance& inst) {
  ActionMask m{capacity_rules(s)};
  if (s.done) return m;
  const auto& task = inst.tasks[s.current_task];
  for (std::size_t j = 0; j < m.allowed.size(); ++j)
    if (m.allowed[j] && !eligible(task, inst.workers[j])) m.allowed[j] = false;
  return m;
}

ActionMask require_some(ActionMask m, const EnvState& s) {
  if (s.done) throw InvalidActionError("action_mask: episode already finished");
  if (m.allowed_count() == 0)
    throw DeadEndError("no worker can serve task " + std::to_string(s.current_task) + " under remaining capacities");
  return m;
}

void check_action(const EnvState& s, const ActionMask& m, std::size_t action) {
  if (s.done) throw InvalidActionError("step called on a finished episode");
  if (action >= m.size() || !m[action])
    throw InvalidActionError("action " + std::to_string(action) + " is masked for task " + std::to_string(s.current_task));
}

// Assigns `task` to `worker` without touching the clock. Returns whether the
// worker was fresh.
bool commit(EnvState& s, std::size_t task, std::size_t worker) {
  s.remaining_capacities[worker] -= s.remaining_efforts[task];
  s.remaining_efforts[task] = 0;
  s.assignment[task] = static_cast<int>(worker);
  const bool fresh = !s.used_workers[worker];
  s.used_workers[worker] = true;
  return fresh;
}

void finish_step(EnvState& s, std::size_t task) {
  s.last_completed = task;
  ++s.clock;
  advance_current(s);
}

StepOutcome place_ap(EnvState& s, std::size_t task, std::size_t worker, const ApInstance& inst, const RewardConfig& rcfg) {
  StepOutcome out;
  out.info.cost = static_cast<double>(inst.cost[task][worker]);
  out.info.activated = commit(s, task, worker);
  s.cumulative_cost += out.info.cost;
  out.reward = -out.info.cost - (out.info.activated ? rcfg.worker_penalty : 0.0);
  return out;
}

StepOutcome place_bin(EnvState& s, std::size_t item, std::size_t bin, const BinInstance& inst, const RewardConfig& rcfg) {
  StepOutcome out;
  out.info.cost = static_cast<double>(inst.items[item].value);
  out.info.activated = commit(s, item, bin);
  s.cumulative_cost += out.info.cost;
  out.reward = out.info.cost - (out.info.activated ? rcfg.worker_penalty : 0.0);
  return out;
}

StepOutcome place_vrp(EnvState& s, std::size_t customer, std::size_t vehicle, const VrpInstance& inst, const RewardConfig& rcfg) {
  StepOutcome out;
  const Point& to = inst.customers[customer].location;
  out.info.cost = distance(s.positions[vehicle], to);
  out.info.activated = commit(s, customer, vehicle);
  s.positions[vehicle] = to;
  s.cumulative_cost += out.info.cost;
  out.reward = -out.info.cost - (out.info.activated ? rcfg.worker_penalty : 0.0);
  return out;
}

void charge_depot_return(EnvState& s, StepOutcome& out, const VrpInstance& inst, const RewardConfig& rcfg) {
  if (!s.done || !rcfg.depot_return) return;
  double back = 0.0;
  for (std::size_t v = 0; v < s.positions.size(); ++v)
    if (s.used_workers[v]) back += distance(s.positions[v], inst.depot);
  out.info.depot_return = back;
  s.cumulative_cost += back;
  out.reward -= back;
}

}  // namespace

std::size_t EnvState::workers_used() const {
  return static_cast<std::size_t>(std::count(used_workers.begin(), used_workers.end(), true));
}

std::size_t ActionMask::allowed_count() const {
  return static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true));
}

void RewardConfig::validate() const {
  if (!(worker_penalty >= 0.0) || !std::isfinite(worker_penalty)) throw ConfigError("worker_penalty must be finite and >= 0");
}

RewardConfig default_reward_config(const AnyInstance& inst) {
  RewardConfig r;
  if (const auto* ap = std::get_if<ApInstance>(&inst)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : ap->cost) {
      for (auto c : row) sum += static_cast<double>(c);
      count += row.size();
    }
    r.worker_penalty = count == 0 ? 0.0 : std::round(sum / static_cast<double>(count));
  } else if (const auto* bin = std::get_if<BinInstance>(&inst)) {
    double sum = 0.0;
    for (const auto& it : bin->items) sum += static_cast<double>(it.value);
    r.worker_penalty = bin->items.empty() ? 0.0 : std::round(sum / static_cast<double>(bin->items.size()));
  }
  return r;
}

EnvState reset(const ApInstance& inst) {
  std::vector<TimeUnits> efforts, caps;
  for (const auto& t : inst.tasks) efforts.push_back(t.effort);
  for (const auto& w : inst.workers) caps.push_back(w.capacity);
  return fresh_state(std::move(efforts), std::move(caps));
}

EnvState reset(const BinInstance& inst) {
  std::vector<TimeUnits> weights;
  for (const auto& it : inst.items) weights.push_back(it.weight);
  auto s = fresh_state(std::move(weights), inst.bins);
  s.skipped.assign(inst.items.size(), false);
  return s;
}

EnvState reset(const VrpInstance& inst) {
  std::vector<TimeUnits> demands;
  for (const auto& c : inst.customers) demands.push_back(c.demand);
  auto s = fresh_state(std::move(demands), inst.vehicles);
  s.positions.assign(inst.vehicles.size(), inst.depot);
  return s;
}

EnvState reset(const AnyInstance& inst) {
  return std::visit([](const auto& i) { return reset(i); }, inst);
}

std::vector<Preassignment> priority_preassign(EnvState& state, const AnyInstance& any, const RewardConfig& rcfg) {
  std::vector<Preassignment> out;
  const TimeUnits full = max_capacity(any);
  if (full <= 0) return out;
  for (std::size_t i = 0; i < state.remaining_efforts.size(); ++i) {
    if (state.remaining_efforts[i] != full) continue;
    // Only untouched workers still hold the full capacity.
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < state.remaining_capacities.size(); ++j) {
      if (state.used_workers[j] || state.remaining_capacities[j] < full) continue;
      if (const auto* ap = std::get_if<ApInstance>(&any)) {
        if (!eligible(ap->tasks[i], ap->workers[j])) continue;
        if (best && ap->cost[i][j] >= ap->cost[i][*best]) continue;
      } else if (best) {
        continue;
      }
      best = j;
    }
    if (!best) throw InfeasibleError("priority pre-assignment: no fresh eligible worker for task " + std::to_string(i));
    StepOutcome o = std::visit(
        [&](const auto& inst) {
          using T = std::decay_t<decltype(inst)>;
          if constexpr (std::is_same_v<T, ApInstance>) return place_ap(state, i, *best, inst, rcfg);
          if constexpr (std::is_same_v<T, BinInstance>) return place_bin(state, i, *best, inst, rcfg);
          if constexpr (std::is_same_v<T, VrpInstance>) return place_vrp(state, i, *best, inst, rcfg);
        },
        any);
    out.push_back({i, *best, o});
  }
  advance_current(state);
  if (auto* vrp = std::get_if<VrpInstance>(&any); vrp && state.done && !out.empty())
    charge_depot_return(state, out.back().outcome, *vrp, rcfg);
  for (auto& p : out) p.outcome.done = false;
  if (!out.empty()) out.back().outcome.done = state.done;
  return out;
}

ActionMask action_mask(const EnvState& state, const ApInstance& inst) { return require_some(ap_rules(state, inst), state); }
ActionMask action_mask(const EnvState& state, const BinInstance&) { return require_some({capacity_rules(state)}, state); }
ActionMask action_mask(const EnvState& state, const VrpInstance&) { return require_some({capacity_rules(state)}, state); }

ActionMask action_mask(const EnvState& state, const AnyInstance& inst) {
  return std::visit([&](const auto& i) { return action_mask(state, i); }, inst);
}

ActionMask feasible_actions(const EnvState& state, const AnyInstance& inst) {
  if (const auto* ap = std::get_if<ApInstance>(&inst)) return ap_rules(state, *ap);
  return {capacity_rules(state)};
}

StepOutcome step(EnvState& state, std::size_t action, const ApInstance& inst, const RewardConfig& rcfg) {
  check_action(state, ap_rules(state, inst), action);
  const auto task = state.current_task;
  StepOutcome out = place_ap(state, task, action, inst, rcfg);
  finish_step(state, task);
  out.done = state.done;
  return out;
}

StepOutcome step(EnvState& state, std::size_t action, const BinInstance& inst, const RewardConfig& rcfg) {
  check_action(state, {capacity_rules(state)}, action);
  const auto item = state.current_task;
  StepOutcome out = place_bin(state, item, action, inst, rcfg);
  finish_step(state, item);
  out.done = state.done;
  return out;
}

StepOutcome step(EnvState& state, std::size_t action, const VrpInstance& inst, const RewardConfig& rcfg) {
  check_action(state, {capacity_rules(state)}, action);
  const auto customer = state.current_task;
  StepOutcome out = place_vrp(state, customer, action, inst, rcfg);
  finish_step(state, customer);
  charge_depot_return(state, out, inst, rcfg);
  out.done = state.done;
  return out;
}

StepOutcome step(EnvState& state, std::size_t action, const AnyInstance& inst, const RewardConfig& rcfg) {
  return std::visit([&](const auto& i) { return step(state, action, i, rcfg); }, inst);
}

StepOutcome skip_item(EnvState& state, const BinInstance&) {
  if (state.done) throw InvalidActionError("skip_item called on a finished episode");
  if (ActionMask{capacity_rules(state)}.allowed_count() != 0)
    throw InvalidActionError("skip_item: item " + std::to_string(state.current_task) + " still fits a bin");
  const auto item = state.current_task;
  state.remaining_efforts[item] = 0;
  state.skipped[item] = true;
  finish_step(state, item);
  StepOutcome out;
  out.info.skipped = true;
  out.done = state.done;
  return out;
}

void settle(EnvState& state, const AnyInstance& inst) {
  const auto* bin = std::get_if<BinInstance>(&inst);
  if (bin == nullptr) return;
  while (!state.done && ActionMask{capacity_rules(state)}.allowed_count() == 0) skip_item(state, *bin);
}

Observation encode_observation(const EnvState& state, const AnyInstance& inst) {
  Observation obs;
  const double norm = std::max<TimeUnits>(1, max_capacity(inst));
  obs.seq.reserve(state.remaining_efforts.size() + state.remaining_capacities.size());
  for (auto e : state.remaining_efforts) obs.seq.push_back(e / norm);
  for (auto c : state.remaining_capacities) obs.seq.push_back(c / norm);
  const double n = static_cast<double>(state.remaining_efforts.size());
  obs.scalars[0] = n == 0 ? 0.0 : static_cast<double>(state.clock) / n;
  obs.scalars[1] = state.last_completed ? static_cast<double>(*state.last_completed + 1) / (n + 1) : 0.0;
  return obs;
}

}  // namespace rlap
