#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlap/baselines.hpp"
#include "rlap/checkpoint.hpp"
#include "rlap/config.hpp"

namespace rlap {

enum class Method { kRl, kExact, kGreedy };
std::string to_string(Method m);
Method parse_method(const std::string& text);

struct BenchRow {
  std::string instance_id;
  ProblemKind kind = ProblemKind::kAp;
  std::size_t size = 0;
  RngSeed seed = 0;
  std::optional<std::size_t> perturbed;  // k, for perturbation rows
  Method method = Method::kGreedy;
  std::optional<double> cost;             // ap cost / bin value / vrp distance
  std::optional<double> objective;
  std::size_t workers_used = 0;
  double solve_time_seconds = 0.0;
  bool feasible = false;
  std::optional<double> gap_vs_exact;
  std::string note;                       // skip or failure reason
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

struct PerturbSpec {
  std::size_t k = 0;
  TimeUnits delta = 5;
  /// Unset: entities 0..k-1. Set: the first k of a seeded permutation, so
  /// growing k under one seed is still cumulative.
  std::optional<RngSeed> selection_seed;
  /// Upper clamp; unset means the instance's largest capacity.
  std::optional<TimeUnits> clamp;

  void validate(std::size_t entity_count) const;
};

/// Adds `delta` to the effort / weight / demand of the selected entities.
AnyInstance perturb(const AnyInstance& inst, const PerturbSpec& spec);

struct TimedSolution {
  Solution solution;
  double seconds = 0.0;
  bool feasible = false;
  std::string note;
};

/// Greedy decode with fixed parameters; the clock covers decoding only.
TimedSolution evaluate_pretrained(const nn::PolicyParams& params, const AnyInstance& inst, const RewardConfig& rcfg);

/// Runs one method; exact falls back to a note when over its size bound.
TimedSolution run_method(Method method, const AnyInstance& inst, const RewardConfig& rcfg, const nn::PolicyParams* params);

/// Relative shortfall of `value` against `exact`, oriented so 0 is optimal
/// and positive is worse (bin compares packed value, others the objective).
double relative_gap(ProblemKind kind, const Solution& candidate, const Solution& exact);

struct BenchConfig {
  ProblemKind kind = ProblemKind::kAp;
  std::vector<std::size_t> sizes;
  std::size_t seeds = 5;
  std::vector<Method> methods{Method::kRl, Method::kExact, Method::kGreedy};
  GenConfig gen;
  /// Checkpoint per size, required for every size when rl is requested.
  std::map<std::size_t, Checkpoint> policies;
};

/// Rows ordered by (size, seed, method). Instance seeds are 1..seeds; with a
/// policy for the size, instances come from its family.
BenchReport run_benchmark(const BenchConfig& cfg);

/// One instance under cumulative perturbations k in `ks`, all decoded by the
/// same parameters. With `oracle`, exact and greedy rows join each k.
BenchReport perturb_eval(const Checkpoint& ckpt, const AnyInstance& inst, const std::vector<std::size_t>& ks, TimeUnits delta,
                         bool oracle, std::optional<RngSeed> selection_seed = std::nullopt);

enum class ReportFormat { kCsv, kMarkdown, kJsonLines };
ReportFormat parse_format(const std::string& text);
std::string emit_report(const BenchReport& report, ReportFormat format);

/// Eval seeds used when a run-config lists none; disjoint from the 1.. range
/// used for benchmark and held-out instances.
std::vector<RngSeed> default_eval_seeds();

struct TrainRun {
  Checkpoint checkpoint;
  std::vector<TrainRecord> log;
  double seconds = 0.0;
};

/// Trains on one family: a base instance drawn from the master seed whose
/// dynamic fields (efforts / weights / demands) are resampled per episode.
TrainRun train_policy(ProblemKind kind, std::size_t n, const RunConfig& cfg,
                      const std::function<void(const TrainRecord&)>& on_record = {});

/// The family member for `seed`.
AnyInstance family_instance(const Checkpoint& ckpt, RngSeed seed);

/// Reference objective used for logging eval gaps: exact when tractable,
/// greedy otherwise.
double reference_objective(const AnyInstance& inst, const RewardConfig& rcfg);

/// Loads every checkpoint file in `dir`, keyed by entity count.
std::map<std::size_t, Checkpoint> load_policies(const std::string& dir, ProblemKind kind);

}  // namespace rlap
