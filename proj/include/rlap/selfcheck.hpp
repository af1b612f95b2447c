#pragma once

#include <iosfwd>
#include <string>

#include "rlap/baselines.hpp"
#include "rlap/neuralnet.hpp"

// Randomized property suites shared by the CLI (`gradcheck`, `selftest`),
// the unit tests and the acceptance run.

namespace rlap {

struct GradSuiteResult {
  std::size_t pairs = 0;
  std::size_t max_parameters = 0;
  double max_relative_error = 0.0;
  std::size_t refined_steps = 0;
  std::size_t unresolved_kinks = 0;
  std::size_t failures = 0;
  double seconds = 0.0;
  bool passed() const noexcept { return failures == 0; }
};

/// `pairs` random (small policy, batch) pairs, each checked against central
/// finite differences.
GradSuiteResult run_gradcheck_suite(std::size_t pairs, RngSeed seed, const nn::GradCheckConfig& check = {});

/// A policy small enough for finite differencing plus a batch of samples
/// drawn from random reachable states. Owns the storage the samples point to.
struct GradCheckCase {
  nn::PolicyParams params;
  nn::LossConfig loss;
  std::vector<Observation> observations;
  std::vector<ActionMask> masks;
  std::vector<nn::Sample> batch;
};
GradCheckCase make_gradcheck_case(RngSeed seed, std::size_t max_parameters = 5000);

struct MaskSuiteResult {
  std::size_t states = 0;
  std::size_t samples = 0;
  std::size_t masked_leaks = 0;   // masked action with probability != 0
  std::size_t bad_sums = 0;       // |sum - 1| > 1e-9
  std::size_t bad_samples = 0;    // sampled action not allowed
  double worst_sum_error = 0.0;
  bool passed() const noexcept { return masked_leaks == 0 && bad_sums == 0 && bad_samples == 0; }
};

/// Random reachable states across all three kinds, scored by random policies.
MaskSuiteResult run_mask_suite(std::size_t states, std::size_t samples, RngSeed seed);

struct EpisodeSuiteResult {
  std::size_t episodes = 0;
  std::size_t negative_values = 0;
  std::size_t conservation_errors = 0;
  std::size_t length_errors = 0;
  std::size_t reward_errors = 0;  // -sum(rewards) != cumulative cost at lambda = 0
  bool passed() const noexcept {
    return negative_values == 0 && conservation_errors == 0 && length_errors == 0 && reward_errors == 0;
  }
};

/// Random AP episodes (n <= max_n) driven by uniformly random feasible actions.
EpisodeSuiteResult run_episode_suite(std::size_t episodes, std::size_t max_n, RngSeed seed);

// Brute-force enumerators, deliberately naive: every assignment, every order.
Solution brute_force_ap(const ApInstance& inst, double lambda);
Solution brute_force_bin(const BinInstance& inst);
Solution brute_force_vrp(const VrpInstance& inst, double lambda = 0.0, bool depot_return = true);

struct OracleSuiteResult {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
  bool passed() const noexcept { return mismatches == 0; }
};

/// exact_* against brute force on random instances with n <= max_n.
OracleSuiteResult run_oracle_suite(ProblemKind kind, std::size_t instances, std::size_t max_n, RngSeed seed);
/// exact_ap(lambda) objective <= greedy_ap(lambda) objective.
OracleSuiteResult run_dominance_suite(std::size_t instances, std::size_t max_n, RngSeed seed);

/// Reduced-size run of every suite above plus roundtrip checks; prints one
/// line per suite and returns whether all passed.
bool run_selftest(std::ostream& log);

}  // namespace rlap
