#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace rlap {

/// Integer durations: task efforts, worker capacities, item weights, demands.
using TimeUnits = std::int32_t;
/// Integer assignment costs and item values.
using CostValue = std::int64_t;
using RngSeed = std::uint64_t;

// Error hierarchy. The CLI maps each family onto an exit code (see ExitCode).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

class SizeError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public UsageError {
 public:
  ParseError(int line, std::string field, const std::string& what)
      : UsageError("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A reachable state in which no action is allowed.
class DeadEndError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kInvariant = 3 };

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr RngSeed derive_seed(RngSeed base, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// Portable random source: MT19937-64 for raw bits, with distributions
/// implemented here so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [lo, hi], rejection sampled (no modulo bias).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ConfigError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rlap
