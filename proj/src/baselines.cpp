#include "rlap/baselines.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <cmath>
#include <limits>
#include <numeric>

namespace rlap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTol = 1e-9;

bool eligible(const TaskSpec& t, const WorkerSpec& w) {
  return std::find(t.eligibility.begin(), t.eligibility.end(), w.worker_class) != t.eligibility.end();
}

// ---------------------------------------------------------------------------
// Assignment problem branch and bound

class ApSearch {
 public:
  ApSearch(const ApInstance& inst, double lambda) : inst_(inst), lambda_(lambda) {
    const auto n = inst.tasks.size();
    const auto m = inst.workers.size();
    caps_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      caps_[j] = inst.workers[j].capacity;
      max_cap_ = std::max(max_cap_, caps_[j]);
    }
    used_.assign(m, false);
    current_.assign(n, -1);

    // Suffix sums of each task's cheapest statically feasible cost.
    min_cost_suffix_.assign(n + 1, 0.0);
    effort_suffix_.assign(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
      double best = kInf;
      for (std::size_t j = 0; j < m; ++j)
        if (eligible(inst.tasks[i], inst.workers[j]) && caps_[j] >= inst.tasks[i].effort)
          best = std::min(best, static_cast<double>(inst.cost[i][j]));
      if (!std::isfinite(best)) throw InfeasibleError("task " + std::to_string(i) + " fits no eligible worker");
      min_cost_suffix_[i] = min_cost_suffix_[i + 1] + best;
      effort_suffix_[i] = effort_suffix_[i + 1] + inst.tasks[i].effort;
    }
  }

  void seed_upper_bound(const Solution& s) {
    best_ = s.objective;
    best_assignment_ = s.assignment;
  }

  bool solve() {
    dfs(0, 0.0);
    return !best_assignment_.empty() || inst_.tasks.empty();
  }

  const std::vector<int>& best_assignment() const { return best_assignment_; }

 private:
  double lower_bound(std::size_t k) const {
    double lb = min_cost_suffix_[k];
    if (lambda_ > 0.0 && max_cap_ > 0) {
      std::int64_t spare = 0;
      for (std::size_t j = 0; j < caps_.size(); ++j)
        if (used_[j]) spare += caps_[j];
      const std::int64_t overflow = effort_suffix_[k] - spare;
      if (overflow > 0) lb += lambda_ * static_cast<double>((overflow + max_cap_ - 1) / max_cap_);
    }
    return lb;
  }

  void dfs(std::size_t k, double acc) {
    if (k == inst_.tasks.size()) {
      if (acc < best_ - kTol || best_assignment_.empty()) {
        best_ = acc;
        best_assignment_ = current_;
      }
      return;
    }
    if (acc + lower_bound(k) >= best_ - kTol) return;

    const auto& task = inst_.tasks[k];
    std::vector<std::pair<double, std::size_t>> options;
    for (std::size_t j = 0; j < caps_.size(); ++j) {
      if (caps_[j] < task.effort || !eligible(task, inst_.workers[j])) continue;
      options.emplace_back(static_cast<double>(inst_.cost[k][j]) + (used_[j] ? 0.0 : lambda_), j);
    }
    std::sort(options.begin(), options.end());
    for (const auto& [delta, j] : options) {
      const bool fresh = !used_[j];
      caps_[j] -= task.effort;
      used_[j] = true;
      current_[k] = static_cast<int>(j);
      dfs(k + 1, acc + delta);
      caps_[j] += task.effort;
      used_[j] = !fresh;
      current_[k] = -1;
    }
  }

  const ApInstance& inst_;
  double lambda_;
  std::vector<TimeUnits> caps_;
  TimeUnits max_cap_ = 0;
  std::vector<bool> used_;
  std::vector<int> current_;
  std::vector<double> min_cost_suffix_;
  std::vector<std::int64_t> effort_suffix_;
  double best_ = kInf;
  std::vector<int> best_assignment_;
};

RewardConfig with_lambda(double lambda, bool depot_return = true) {
  RewardConfig r;
  r.worker_penalty = lambda;
  r.depot_return = depot_return;
  return r;
}

// ---------------------------------------------------------------------------
// Bin packing branch and bound: maximize value, then minimize bins.

class BinSearch {
 public:
  explicit BinSearch(const BinInstance& inst) : inst_(inst), caps_(inst.bins), used_(inst.bins.size(), false) {
    current_.assign(inst.items.size(), -1);
    value_suffix_.assign(inst.items.size() + 1, 0);
    const TimeUnits largest = caps_.empty() ? 0 : *std::max_element(caps_.begin(), caps_.end());
    for (std::size_t i = inst.items.size(); i-- > 0;)
      value_suffix_[i] = value_suffix_[i + 1] + (inst.items[i].weight <= largest ? inst.items[i].value : 0);
  }

  void seed(const Solution& s) {
    best_value_ = static_cast<CostValue>(std::llround(s.total_cost));
    best_bins_ = s.workers_used;
    best_assignment_ = s.assignment;
  }

  void solve() { dfs(0, 0, 0); }
  const std::vector<int>& best_assignment() const { return best_assignment_; }

 private:
  bool better(CostValue value, std::size_t bins) const {
    return value > best_value_ || (value == best_value_ && bins < best_bins_);
  }

  void dfs(std::size_t k, CostValue value, std::size_t bins) {
    if (k == inst_.items.size()) {
      if (best_assignment_.empty() || better(value, bins)) {
        best_value_ = value;
        best_bins_ = bins;
        best_assignment_ = current_;
      }
      return;
    }
    const CostValue bound = value + value_suffix_[k];
    if (!best_assignment_.empty() && (bound < best_value_ || (bound == best_value_ && bins >= best_bins_))) return;

    const auto w = inst_.items[k].weight;
    for (std::size_t j = 0; j < caps_.size(); ++j) {
      if (caps_[j] < w) continue;
      if (!used_[j]) {
        // Fresh bins of equal capacity are interchangeable; try the first only.
        bool duplicate = false;
        for (std::size_t q = 0; q < j && !duplicate; ++q) duplicate = !used_[q] && inst_.bins[q] == inst_.bins[j];
        if (duplicate) continue;
      }
      const bool fresh = !used_[j];
      caps_[j] -= w;
      used_[j] = true;
      current_[k] = static_cast<int>(j);
      dfs(k + 1, value + inst_.items[k].value, bins + (fresh ? 1 : 0));
      caps_[j] += w;
      used_[j] = !fresh;
    }
    current_[k] = -1;
    dfs(k + 1, value, bins);
  }

  const BinInstance& inst_;
  std::vector<TimeUnits> caps_;
  std::vector<bool> used_;
  std::vector<int> current_;
  std::vector<CostValue> value_suffix_;
  CostValue best_value_ = 0;
  std::size_t best_bins_ = 0;
  std::vector<int> best_assignment_;
};

// ---------------------------------------------------------------------------
// VRP helpers

struct TourTable {
  std::vector<double> cost;                    // per customer subset
  std::vector<std::vector<std::size_t>> order; // visit order per subset
};

// Held-Karp over every subset: cheapest depot -> S (-> depot) walk.
TourTable best_tours(const VrpInstance& inst, bool depot_return) {
  const std::size_t n = inst.customers.size();
  const std::size_t full = std::size_t{1} << n;
  std::vector<double> dp(full * std::max<std::size_t>(n, 1), kInf);
  std::vector<int> parent(dp.size(), -1);
  auto loc = [&](std::size_t i) { return inst.customers[i].location; };
  for (std::size_t i = 0; i < n; ++i) dp[(std::size_t{1} << i) * n + i] = distance(inst.depot, loc(i));
  for (std::size_t s = 1; s < full; ++s)
    for (std::size_t last = 0; last < n; ++last) {
      if (!(s >> last & 1U)) continue;
      const double here = dp[s * n + last];
      if (!std::isfinite(here)) continue;
      for (std::size_t nxt = 0; nxt < n; ++nxt) {
        if (s >> nxt & 1U) continue;
        const std::size_t t = s | (std::size_t{1} << nxt);
        const double cand = here + distance(loc(last), loc(nxt));
        if (cand < dp[t * n + nxt]) {
          dp[t * n + nxt] = cand;
          parent[t * n + nxt] = static_cast<int>(last);
        }
      }
    }
  TourTable table;
  table.cost.assign(full, 0.0);
  table.order.assign(full, {});
  for (std::size_t s = 1; s < full; ++s) {
    double best = kInf;
    std::size_t best_last = 0;
    for (std::size_t last = 0; last < n; ++last) {
      if (!(s >> last & 1U)) continue;
      const double c = dp[s * n + last] + (depot_return ? distance(loc(last), inst.depot) : 0.0);
      if (c < best) {
        best = c;
        best_last = last;
      }
    }
    table.cost[s] = best;
    std::vector<std::size_t> path;
    std::size_t cur = s;
    int node = static_cast<int>(best_last);
    while (node >= 0) {
      path.push_back(static_cast<std::size_t>(node));
      const int prev = parent[cur * n + static_cast<std::size_t>(node)];
      cur &= ~(std::size_t{1} << node);
      node = prev;
    }
    std::reverse(path.begin(), path.end());
    table.order[s] = std::move(path);
  }
  return table;
}

double route_distance(const VrpInstance& inst, const std::vector<std::size_t>& route, bool depot_return) {
  if (route.empty()) return 0.0;
  double d = distance(inst.depot, inst.customers[route.front()].location);
  for (std::size_t k = 1; k < route.size(); ++k)
    d += distance(inst.customers[route[k - 1]].location, inst.customers[route[k]].location);
  if (depot_return) d += distance(inst.customers[route.back()].location, inst.depot);
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------

Solution greedy_ap(const ApInstance& inst, double lambda) {
  Solution s;
  s.assignment.assign(inst.tasks.size(), -1);
  std::vector<TimeUnits> caps;
  for (const auto& w : inst.workers) caps.push_back(w.capacity);
  std::vector<bool> used(caps.size(), false);
  for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
    std::optional<std::size_t> best;
    double best_score = kInf;
    for (std::size_t j = 0; j < caps.size(); ++j) {
      if (caps[j] < inst.tasks[i].effort || !eligible(inst.tasks[i], inst.workers[j])) continue;
      const double score = static_cast<double>(inst.cost[i][j]) + (used[j] ? 0.0 : lambda);
      if (score < best_score) {
        best_score = score;
        best = j;
      }
    }
    if (!best) throw InfeasibleError("greedy_ap: task " + std::to_string(i) + " fits no remaining eligible worker");
    caps[*best] -= inst.tasks[i].effort;
    used[*best] = true;
    s.assignment[i] = static_cast<int>(*best);
  }
  return recompute(inst, std::move(s), with_lambda(lambda));
}

Solution exact_ap(const ApInstance& inst, double lambda) {
  if (inst.tasks.size() > kExactApMaxTasks)
    throw SizeError("exact_ap handles at most " + std::to_string(kExactApMaxTasks) + " tasks");
  ApSearch search(inst, lambda);
  try {
    search.seed_upper_bound(greedy_ap(inst, lambda));
  } catch (const InfeasibleError&) {
    // Greedy can dead-end where a feasible assignment still exists.
  }
  if (!search.solve()) throw InfeasibleError("exact_ap: no feasible assignment exists");
  Solution s;
  s.assignment = search.best_assignment();
  s.optimal = true;
  return recompute(inst, std::move(s), with_lambda(lambda));
}

Solution greedy_bin(const BinInstance& inst) {
  std::vector<std::size_t> order(inst.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // value_a / weight_a > value_b / weight_b, exact in integers
    return inst.items[a].value * inst.items[b].weight > inst.items[b].value * inst.items[a].weight;
  });
  Solution s;
  s.assignment.assign(inst.items.size(), -1);
  std::vector<TimeUnits> caps = inst.bins;
  for (auto i : order) {
    const auto w = inst.items[i].weight;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < caps.size(); ++j)
      if (caps[j] >= w && (!best || caps[j] < caps[*best])) best = j;
    if (!best) continue;
    caps[*best] -= w;
    s.assignment[i] = static_cast<int>(*best);
  }
  return recompute(inst, std::move(s), {});
}

Solution exact_bin(const BinInstance& inst) {
  if (inst.items.size() > kExactBinMaxItems)
    throw SizeError("exact_bin handles at most " + std::to_string(kExactBinMaxItems) + " items");
  BinSearch search(inst);
  search.seed(greedy_bin(inst));
  search.solve();
  Solution s;
  s.assignment = search.best_assignment();
  s.optimal = true;
  return recompute(inst, std::move(s), {});
}

Solution exact_vrp(const VrpInstance& inst, double lambda, bool depot_return) {
  const std::size_t n = inst.customers.size();
  if (n > kExactVrpMaxCustomers)
    throw SizeError("exact_vrp handles at most " + std::to_string(kExactVrpMaxCustomers) + " customers");
  const auto tours = best_tours(inst, depot_return);
  const std::size_t full = std::size_t{1} << n;
  std::vector<TimeUnits> demand(full, 0);
  for (std::size_t s = 1; s < full; ++s) {
    const auto low = static_cast<std::size_t>(std::countr_zero(s));
    demand[s] = demand[s & (s - 1)] + inst.customers[low].demand;
  }

  // best[v][S]: cheapest way for vehicles v.. to serve exactly S.
  const std::size_t V = inst.vehicles.size();
  std::vector<std::vector<double>> best(V + 1, std::vector<double>(full, kInf));
  std::vector<std::vector<std::size_t>> pick(V + 1, std::vector<std::size_t>(full, 0));
  best[V][0] = 0.0;
  for (std::size_t v = V; v-- > 0;) {
    for (std::size_t s = 0; s < full; ++s) {
      // Enumerate every subset t of s (including empty) served by vehicle v.
      for (std::size_t t = s;; t = (t - 1) & s) {
        if (demand[t] <= inst.vehicles[v]) {
          const double rest = best[v + 1][s & ~t];
          if (std::isfinite(rest)) {
            const double c = rest + (t == 0 ? 0.0 : tours.cost[t] + lambda);
            if (c < best[v][s]) {
              best[v][s] = c;
              pick[v][s] = t;
            }
          }
        }
        if (t == 0) break;
      }
    }
  }
  if (!std::isfinite(best[0][full - 1])) throw InfeasibleError("exact_vrp: demands cannot be covered by the fleet");

  Solution sol;
  sol.assignment.assign(n, -1);
  sol.routes.assign(V, {});
  std::size_t s = full - 1;
  for (std::size_t v = 0; v < V; ++v) {
    const std::size_t t = pick[v][s];
    if (t != 0) sol.routes[v] = tours.order[t];
    for (auto c : sol.routes[v]) sol.assignment[c] = static_cast<int>(v);
    s &= ~t;
  }
  sol.optimal = true;
  return recompute(inst, std::move(sol), with_lambda(lambda, depot_return));
}

Solution greedy_vrp(const VrpInstance& inst, double lambda, bool depot_return) {
  const std::size_t n = inst.customers.size();
  Solution sol;
  sol.assignment.assign(n, -1);
  sol.routes.assign(inst.vehicles.size(), {});
  std::size_t served = 0;
  for (std::size_t v = 0; v < inst.vehicles.size() && served < n; ++v) {
    TimeUnits cap = inst.vehicles[v];
    Point here = inst.depot;
    while (true) {
      std::optional<std::size_t> next;
      double best = kInf;
      for (std::size_t c = 0; c < n; ++c) {
        if (sol.assignment[c] >= 0 || inst.customers[c].demand > cap) continue;
        const double d = distance(here, inst.customers[c].location);
        if (d < best) {
          best = d;
          next = c;
        }
      }
      if (!next) break;
      sol.assignment[*next] = static_cast<int>(v);
      sol.routes[v].push_back(*next);
      cap -= inst.customers[*next].demand;
      here = inst.customers[*next].location;
      ++served;
    }
  }
  if (served < n) throw InfeasibleError("greedy_vrp: fleet exhausted with customers unserved");
  return recompute(inst, std::move(sol), with_lambda(lambda, depot_return));
}

// ---------------------------------------------------------------------------

Solution recompute(const AnyInstance& any, Solution sol, const RewardConfig& rcfg) {
  const auto m = action_count(any);
  std::vector<bool> used(m, false);
  for (int a : sol.assignment)
    if (a >= 0 && static_cast<std::size_t>(a) < m) used[static_cast<std::size_t>(a)] = true;
  sol.workers_used = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
  const double opened = static_cast<double>(sol.workers_used);

  if (const auto* ap = std::get_if<ApInstance>(&any)) {
    double cost = 0.0;
    for (std::size_t i = 0; i < sol.assignment.size(); ++i)
      if (sol.assignment[i] >= 0) cost += static_cast<double>(ap->cost[i][static_cast<std::size_t>(sol.assignment[i])]);
    sol.total_cost = cost;
    sol.objective = cost + rcfg.worker_penalty * opened;
  } else if (const auto* bin = std::get_if<BinInstance>(&any)) {
    double value = 0.0;
    for (std::size_t i = 0; i < sol.assignment.size(); ++i)
      if (sol.assignment[i] >= 0) value += static_cast<double>(bin->items[i].value);
    sol.total_cost = value;
    sol.objective = -value;
  } else {
    const auto& vrp = std::get<VrpInstance>(any);
    double dist = 0.0;
    for (const auto& r : sol.routes) dist += route_distance(vrp, r, rcfg.depot_return);
    sol.total_cost = dist;
    sol.objective = dist + rcfg.worker_penalty * opened;
  }
  return sol;
}

void validate_solution(const AnyInstance& any, const Solution& sol, const RewardConfig& rcfg) {
  const auto n = entity_count(any);
  const auto m = action_count(any);
  if (sol.assignment.size() != n) throw InvariantError("solution assignment length != entity count");
  std::vector<std::int64_t> load(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int a = sol.assignment[i];
    if (a < 0) {
      if (kind_of(any) != ProblemKind::kBin) throw InvariantError("entity " + std::to_string(i) + " is unassigned");
      continue;
    }
    if (static_cast<std::size_t>(a) >= m) throw InvariantError("assignment index out of range");
    std::visit(
        [&](const auto& inst) {
          using T = std::decay_t<decltype(inst)>;
          if constexpr (std::is_same_v<T, ApInstance>) {
            load[static_cast<std::size_t>(a)] += inst.tasks[i].effort;
            if (!eligible(inst.tasks[i], inst.workers[static_cast<std::size_t>(a)]))
              throw InvariantError("task " + std::to_string(i) + " assigned to an ineligible worker");
          } else if constexpr (std::is_same_v<T, BinInstance>) {
            load[static_cast<std::size_t>(a)] += inst.items[i].weight;
          } else {
            load[static_cast<std::size_t>(a)] += inst.customers[i].demand;
          }
        },
        any);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const TimeUnits cap = std::visit(
        [&](const auto& inst) -> TimeUnits {
          using T = std::decay_t<decltype(inst)>;
          if constexpr (std::is_same_v<T, ApInstance>) return inst.workers[j].capacity;
          if constexpr (std::is_same_v<T, BinInstance>) return inst.bins[j];
          if constexpr (std::is_same_v<T, VrpInstance>) return inst.vehicles[j];
        },
        any);
    if (load[j] > cap) throw InvariantError("capacity of worker " + std::to_string(j) + " exceeded");
  }
  if (const auto* vrp = std::get_if<VrpInstance>(&any)) {
    std::vector<int> seen(n, -1);
    if (sol.routes.size() != vrp->vehicles.size()) throw InvariantError("vrp solution needs one route per vehicle");
    for (std::size_t v = 0; v < sol.routes.size(); ++v)
      for (auto c : sol.routes[v]) {
        if (c >= n || seen[c] >= 0) throw InvariantError("route visits a customer twice or out of range");
        seen[c] = static_cast<int>(v);
      }
    if (seen != sol.assignment) throw InvariantError("routes disagree with the assignment");
  }
  const Solution fresh = recompute(any, sol, rcfg);
  if (fresh.total_cost != sol.total_cost || fresh.objective != sol.objective || fresh.workers_used != sol.workers_used)
    throw InvariantError("stored solution totals differ from recomputation");
}

Solution solution_from_state(const AnyInstance& any, const EnvState& st, const RewardConfig& rcfg) {
  if (!st.done) throw UsageError("solution_from_state: episode not finished");
  Solution sol;
  sol.assignment = st.assignment;
  if (const auto* vrp = std::get_if<VrpInstance>(&any)) {
    // Customers are served in index order, so each route is ascending.
    sol.routes.assign(vrp->vehicles.size(), {});
    for (std::size_t c = 0; c < st.assignment.size(); ++c)
      if (st.assignment[c] >= 0) sol.routes[static_cast<std::size_t>(st.assignment[c])].push_back(c);
  }
  return recompute(any, std::move(sol), rcfg);
}

}  // namespace rlap
