#pragma once

#include <vector>

#include "rlap/envs.hpp"
#include "rlap/instances.hpp"

namespace rlap {

/// A complete answer to one instance, from any solver.
struct Solution {
  /// Entity -> worker/bin/vehicle index, -1 when unassigned (bin: unpacked).
  std::vector<int> assignment;
  /// VRP only: customers of each vehicle in visit order.
  std::vector<std::vector<std::size_t>> routes;
  /// ap: assignment cost, bin: packed value, vrp: travelled distance.
  double total_cost = 0.0;
  /// Quantity every solver minimizes. ap: cost + lambda * workers;
  /// bin: -value; vrp: distance + lambda * vehicles.
  double objective = 0.0;
  std::size_t workers_used = 0;
  bool optimal = false;
};

inline constexpr std::size_t kExactApMaxTasks = 14;
inline constexpr std::size_t kExactBinMaxItems = 14;
inline constexpr std::size_t kExactVrpMaxCustomers = 9;

Solution exact_ap(const ApInstance& inst, double lambda);
Solution greedy_ap(const ApInstance& inst, double lambda);

Solution exact_bin(const BinInstance& inst);
Solution greedy_bin(const BinInstance& inst);

Solution exact_vrp(const VrpInstance& inst, double lambda = 0.0, bool depot_return = true);
Solution greedy_vrp(const VrpInstance& inst, double lambda = 0.0, bool depot_return = true);

/// Solves each eligibility cluster independently and stitches the parts back
/// into one Solution for the source instance.
template <typename Solver>
Solution solve_by_cluster(const ApInstance& inst, double lambda, Solver&& solver);

/// Recomputes total_cost, objective and workers_used from the assignment
/// (and routes for vrp).
Solution recompute(const AnyInstance& inst, Solution sol, const RewardConfig& rcfg);

/// Throws InvariantError unless every capacity and eligibility constraint
/// holds, every non-bin entity is assigned, and the stored totals match a
/// recomputation exactly.
void validate_solution(const AnyInstance& inst, const Solution& sol, const RewardConfig& rcfg);

/// Solution reached by an environment episode (RL decoding).
Solution solution_from_state(const AnyInstance& inst, const EnvState& final_state, const RewardConfig& rcfg);

// ---------------------------------------------------------------------------

template <typename Solver>
Solution solve_by_cluster(const ApInstance& inst, double lambda, Solver&& solver) {
  Solution out;
  out.assignment.assign(inst.tasks.size(), -1);
  out.optimal = true;
  for (const auto& cluster : eligibility_clusters(inst)) {
    const Solution part = solver(cluster.instance, lambda);
    for (std::size_t k = 0; k < cluster.task_ids.size(); ++k)
      out.assignment[cluster.task_ids[k]] = static_cast<int>(cluster.worker_ids[static_cast<std::size_t>(part.assignment[k])]);
    out.optimal = out.optimal && part.optimal;
  }
  RewardConfig r;
  r.worker_penalty = lambda;
  return recompute(inst, std::move(out), r);
}

}  // namespace rlap
