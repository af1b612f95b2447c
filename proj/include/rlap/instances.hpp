#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "rlap/common.hpp"

namespace rlap {

using WorkerClass = std::string;

struct TaskSpec {
  TimeUnits effort = 1;
  std::vector<WorkerClass> eligibility;  // sorted, unique

  bool operator==(const TaskSpec&) const = default;
};

struct WorkerSpec {
  TimeUnits capacity = 0;
  WorkerClass worker_class;

  bool operator==(const WorkerSpec&) const = default;
};

/// Assignment problem: tasks with efforts, workers with time-unit capacities
/// and a cost for every (task, worker) pair.
struct ApInstance {
  std::vector<TaskSpec> tasks;
  std::vector<WorkerSpec> workers;
  std::vector<std::vector<CostValue>> cost;  // [task][worker]
  RngSeed seed = 0;

  std::size_t task_count() const noexcept { return tasks.size(); }
  std::size_t worker_count() const noexcept { return workers.size(); }

  bool operator==(const ApInstance&) const = default;
};

struct BinItem {
  TimeUnits weight = 1;
  CostValue value = 0;

  bool operator==(const BinItem&) const = default;
};

struct BinInstance {
  std::vector<BinItem> items;
  std::vector<TimeUnits> bins;  // capacities
  RngSeed seed = 0;

  bool operator==(const BinInstance&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b) noexcept;

struct Customer {
  Point location;
  TimeUnits demand = 1;

  bool operator==(const Customer&) const = default;
};

struct VrpInstance {
  Point depot;
  std::vector<Customer> customers;
  std::vector<TimeUnits> vehicles;  // capacities
  RngSeed seed = 0;

  bool operator==(const VrpInstance&) const = default;
};

using AnyInstance = std::variant<ApInstance, BinInstance, VrpInstance>;

enum class ProblemKind { kAp, kBin, kVrp };

std::string to_string(ProblemKind kind);
ProblemKind parse_kind(const std::string& text);
ProblemKind kind_of(const AnyInstance& inst) noexcept;

/// Number of entities the policy must place (tasks, items or customers).
std::size_t entity_count(const AnyInstance& inst) noexcept;
/// Number of actions (workers, bins or vehicles).
std::size_t action_count(const AnyInstance& inst) noexcept;
/// Largest capacity among workers/bins/vehicles; the normalization and
/// "full effort" reference.
TimeUnits max_capacity(const AnyInstance& inst) noexcept;

struct GenConfig {
  std::size_t worker_surplus = 2;
  TimeUnits capacity_default = 15;
  TimeUnits effort_cap = 15;
  std::array<CostValue, 2> cost_range{10, 200};
  std::array<double, 2> coord_range{0.0, 1000.0};
  std::size_t class_count = 1;

  /// Throws ConfigError when inconsistent.
  void validate() const;

  bool operator==(const GenConfig&) const = default;
};

ApInstance generate_ap_instance(std::size_t n, RngSeed seed, const GenConfig& cfg = {});
BinInstance generate_bin_instance(std::size_t n, RngSeed seed, const GenConfig& cfg = {});
VrpInstance generate_vrp_instance(std::size_t n, RngSeed seed, const GenConfig& cfg = {});
AnyInstance generate_instance(ProblemKind kind, std::size_t n, RngSeed seed, const GenConfig& cfg = {});

/// Redraws the dynamic elements (efforts, weights, demands) of `base` from
/// `seed` and keeps everything else: costs, values, coordinates, capacities,
/// eligibility. A base instance plus this resampling defines an instance
/// family that one policy is trained on.
AnyInstance resample_dynamic(const AnyInstance& base, RngSeed seed, const GenConfig& cfg = {});

/// Throws InvariantError describing the first violated invariant.
void validate(const ApInstance& inst);
void validate(const BinInstance& inst);
void validate(const VrpInstance& inst);
void validate(const AnyInstance& inst);

struct ApCluster {
  ApInstance instance;
  std::vector<std::size_t> task_ids;    // indices into the source instance
  std::vector<std::size_t> worker_ids;  // indices into the source instance
};

/// Partitions tasks by identical eligibility set; each cluster carries the
/// workers whose class is in that set. Clusters are ordered by first task.
std::vector<ApCluster> eligibility_clusters(const ApInstance& inst);

std::string serialize_instance(const AnyInstance& inst);
AnyInstance parse_instance(const std::string& text);

}  // namespace rlap
