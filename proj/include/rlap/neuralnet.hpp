#pragma once

#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "rlap/common.hpp"
#include "rlap/envs.hpp"

namespace rlap::nn {

/// Dense row-major array of 64-bit reals.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);
  static Tensor zeros(std::vector<std::size_t> dims);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t dim(std::size_t k) const { return shape.at(k); }
  bool operator==(const Tensor&) const = default;
};

enum class Activation { kIdentity, kRelu };

/// y = act(x W + b), W stored [in][out] row-major.
struct DenseView {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
  std::span<const double> weights;
  std::span<const double> bias;
};

/// Same-length 1-D convolution, stride 1, zero padding kernel / 2 on each
/// side. Weights stored [filter][tap][channel].
struct ConvView {
  std::size_t channels = 1;
  std::size_t filters = 0;
  std::size_t kernel = 3;
  Activation activation = Activation::kRelu;
  std::span<const double> weights;
  std::span<const double> bias;
};

/// input: [in] or [batch, in]. Output keeps the batch dimension.
Tensor dense_forward(const DenseView& layer, const Tensor& input);
/// seq: [length, channels] -> [length, filters].
Tensor conv1d_forward(const ConvView& layer, const Tensor& seq);

/// Softmax restricted to allowed entries; masked entries are exactly 0.
std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& mask);

/// PPO clipped surrogate for one sample, negated for minimization:
/// -min(r A, clip(r, 1 - eps, 1 + eps) A) with r = exp(new - old).
double ppo_clip_loss(double log_prob_new, double log_prob_old, double advantage, double epsilon);

double mse_loss(double prediction, double target);
double mse_loss(std::span<const double> predictions, std::span<const double> targets);

// ---------------------------------------------------------------------------
// Actor / critic parameter stacks

/// Trunk: seq -> conv1d -> flatten -> dense(hidden); scalars -> dense(hidden)
/// -> dense(hidden); concat -> head dense(outputs).
struct TrunkShape {
  std::size_t seq_len = 0;
  std::size_t filters = 128;
  std::size_t kernel = 3;
  std::size_t hidden = 128;
  std::size_t scalar_inputs = 2;
  std::size_t outputs = 1;

  bool operator==(const TrunkShape&) const = default;
};

/// Allocator with a fixed 64-byte alignment. Vectorized kernels split their
/// loops by address alignment, so a fixed base keeps results bit-identical
/// no matter where the store lands in memory.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

enum class LayerKind { kConv1d, kDense };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kDense;
  std::size_t in = 0;      // dense: input width; conv: channels
  std::size_t out = 0;     // dense: output width; conv: filters
  std::size_t kernel = 1;  // conv only
  Activation activation = Activation::kIdentity;
  std::size_t offset = 0;  // first weight in the flat store; bias follows
  std::size_t weight_count = 0;
  std::size_t bias_count = 0;

  bool operator==(const LayerSpec&) const = default;
};

/// Flat parameter store with per-layer views, in declared layer order:
/// conv, seq_dense, scalar_dense1, scalar_dense2, head.
class LayerStack {
 public:
  enum Index : std::size_t { kConv = 0, kSeqDense, kScalarDense1, kScalarDense2, kHead, kLayerCount };

  LayerStack() = default;
  explicit LayerStack(const TrunkShape& shape);

  const TrunkShape& shape() const noexcept { return shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  DenseView dense(std::size_t layer) const;
  ConvView conv() const;

  /// Uniform(+-sqrt(6 / fan_in)) weights scaled by `head_scale` on the head;
  /// zero biases.
  void initialize(Rng& rng, double head_scale = 1.0);
  void fill(double v);

  bool congruent(const LayerStack& other) const noexcept { return shape_ == other.shape_; }
  bool operator==(const LayerStack& other) const = default;

 private:
  TrunkShape shape_;
  std::vector<LayerSpec> layers_;
  std::vector<double, AlignedAllocator<double>> data_;
};

struct PolicyParams {
  LayerStack actor;
  LayerStack critic;

  PolicyParams() = default;
  /// Actor head width = action_count, critic head width = 1.
  PolicyParams(std::size_t seq_len, std::size_t action_count, std::size_t filters = 128, std::size_t hidden = 128);

  std::size_t action_count() const noexcept { return actor.shape().outputs; }
  std::size_t size() const noexcept { return actor.size() + critic.size(); }
  void initialize(RngSeed seed);
  /// Same structure, all zeros.
  PolicyParams zeros_like() const;
  bool congruent(const PolicyParams& other) const noexcept {
    return actor.congruent(other.actor) && critic.congruent(other.critic);
  }
  bool operator==(const PolicyParams&) const = default;
};

/// Holds dloss/dparameter with the same layout as PolicyParams.
using GradientSet = PolicyParams;

struct ActorOutput {
  std::vector<double> probs;
  std::vector<double> log_probs;  // meaningful only where the mask allows; 0 elsewhere
};

ActorOutput actor_forward(const PolicyParams& params, const Observation& obs, const ActionMask& mask);
double critic_forward(const PolicyParams& params, const Observation& obs);

// ---------------------------------------------------------------------------
// Batched losses and reverse-mode gradients

/// One training sample as seen by the loss.
struct Sample {
  const Observation* obs = nullptr;
  const ActionMask* mask = nullptr;
  std::size_t action = 0;
  double log_prob_old = 0.0;
  double advantage = 0.0;
  double return_target = 0.0;
};

struct LossConfig {
  double epsilon = 0.2;
  double entropy_coef = 0.0;
};

struct LossReport {
  double actor_loss = 0.0;   // mean clipped surrogate (negated) minus entropy bonus
  double critic_loss = 0.0;  // mean squared error
  double entropy = 0.0;      // mean policy entropy over allowed actions
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  /// Hash of every ReLU on/off state and PPO clip branch; changes exactly
  /// when the loss crosses a kink. Only computed when no gradients are requested.
  std::uint64_t kink_signature = 0;

  double total() const noexcept { return actor_loss + critic_loss; }
};

/// Mean actor and critic losses over `batch`. When `grads` is non-null it is
/// overwritten with the exact gradients of total().
LossReport evaluate_batch(const PolicyParams& params, std::span<const Sample> batch, const LossConfig& cfg,
                          GradientSet* grads = nullptr);

/// Adam with inverse-time step-size decay: rate = lr / (1 + decay * step).
class Adam {
 public:
  struct Config {
    double lr = 1e-4;
    double decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::size_t size, Config cfg);

  double effective_rate(std::size_t step_index) const noexcept;
  /// Applies one update using bias correction for step `step_index + 1`.
  void update(std::span<double> params, std::span<const double> grads, std::size_t step_index);
  /// Same, with the decayed rate taken at `decay_index` instead.
  void update(std::span<double> params, std::span<const double> grads, std::size_t step_index, std::size_t decay_index);

  const Config& config() const noexcept { return cfg_; }

 private:
  Config cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct GradCheckReport {
  std::size_t parameters = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;          // flat index, actor first then critic
  std::size_t refined_steps = 0;        // parameters re-probed with a smaller step at a kink
  std::size_t unresolved_kinks = 0;     // kinks no step size could avoid (excluded)
  bool passed = true;
};

struct GradCheckConfig {
  double step = 1e-4;
  double tolerance = 1e-4;
  double floor = 1e-6;  // denominators below this are treated as absolute errors
};

/// Compares `analytic` against central finite differences of total() for
/// every parameter. When a probe straddles a ReLU or clip kink the step is
/// shrunk until both sides share the unperturbed branch pattern.
GradCheckReport compare_gradients(const PolicyParams& params, std::span<const Sample> batch, const LossConfig& cfg,
                                  const GradientSet& analytic, const GradCheckConfig& check = {});

GradCheckReport finite_difference_check(const PolicyParams& params, std::span<const Sample> batch,
                                        const LossConfig& cfg, const GradCheckConfig& check = {});

}  // namespace rlap::nn
