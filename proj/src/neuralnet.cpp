#include "rlap/neuralnet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rlap::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;
using MutMap = Eigen::Map<Mat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

double apply(Activation a, double x) { return a == Activation::kRelu ? std::max(0.0, x) : x; }

ConstMap as_matrix(std::span<const double> s, std::size_t rows, std::size_t cols) {
  return ConstMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::span<double> s, std::size_t rows, std::size_t cols) {
  return MutMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Eigen::Map<const RowVec> as_row(std::span<const double> s) {
  return Eigen::Map<const RowVec>(s.data(), static_cast<Eigen::Index>(s.size()));
}

Eigen::Map<RowVec> as_row(std::span<double> s) {
  return Eigen::Map<RowVec>(s.data(), static_cast<Eigen::Index>(s.size()));
}

void relu_inplace(Mat& m) { m = m.cwiseMax(0.0); }

void relu_backward(Mat& grad, const Mat& activated) { grad = (activated.array() > 0.0).select(grad, 0.0); }

std::uint64_t fold(std::uint64_t h, std::uint64_t v) {
  return (h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))) * 0x100000001b3ULL;
}

std::uint64_t sign_hash(std::uint64_t h, const Mat& m) {
  std::uint64_t word = 0;
  int bits = 0;
  const double* p = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    word = (word << 1) | (p[k] > 0.0 ? 1u : 0u);
    if (++bits == 64) {
      h = fold(h, word);
      word = 0;
      bits = 0;
    }
  }
  return fold(fold(h, word), static_cast<std::uint64_t>(m.size()));
}

// Activations of one trunk over a batch, kept for the backward pass.
struct TrunkCache {
  Mat cols;   // im2col [batch * len, kernel * channels]
  Mat conv;   // [batch * len, filters], post-ReLU; row-major == [batch, len * filters]
  Mat h_seq;  // [batch, hidden]
  Mat scal;   // [batch, scalar_inputs]
  Mat h1;
  Mat h2;
  Mat cat;    // [batch, 2 * hidden]
  Mat out;    // [batch, outputs]
};

void check_obs(const TrunkShape& shape, const Observation& obs) {
  if (obs.seq.size() != shape.seq_len)
    throw ShapeError("observation length " + std::to_string(obs.seq.size()) + " != network input length " +
                     std::to_string(shape.seq_len));
}

void trunk_forward(const LayerStack& stack, std::span<const Sample> batch, TrunkCache& c) {
  const auto& s = stack.shape();
  const auto B = batch.size();
  const auto L = s.seq_len;
  const auto K = s.kernel;
  const auto pad = K / 2;
  c.cols.setZero(static_cast<Eigen::Index>(B * L), static_cast<Eigen::Index>(K));
  c.scal.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(s.scalar_inputs));
  for (std::size_t b = 0; b < B; ++b) {
    const Observation& obs = *batch[b].obs;
    check_obs(s, obs);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < K; ++k) {
        const auto idx = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(L))
          c.cols(static_cast<Eigen::Index>(b * L + l), static_cast<Eigen::Index>(k)) = obs.seq[static_cast<std::size_t>(idx)];
      }
    for (std::size_t k = 0; k < s.scalar_inputs; ++k) c.scal(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = obs.scalars[k];
  }

  using I = LayerStack::Index;
  c.conv.noalias() = c.cols * as_matrix(stack.weights(I::kConv), s.filters, K).transpose();
  c.conv.rowwise() += as_row(stack.bias(I::kConv));
  relu_inplace(c.conv);

  const ConstMap flat(c.conv.data(), static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(L * s.filters));
  c.h_seq.noalias() = flat * as_matrix(stack.weights(I::kSeqDense), L * s.filters, s.hidden);
  c.h_seq.rowwise() += as_row(stack.bias(I::kSeqDense));
  relu_inplace(c.h_seq);

  c.h1.noalias() = c.scal * as_matrix(stack.weights(I::kScalarDense1), s.scalar_inputs, s.hidden);
  c.h1.rowwise() += as_row(stack.bias(I::kScalarDense1));
  relu_inplace(c.h1);
  c.h2.noalias() = c.h1 * as_matrix(stack.weights(I::kScalarDense2), s.hidden, s.hidden);
  c.h2.rowwise() += as_row(stack.bias(I::kScalarDense2));
  relu_inplace(c.h2);

  c.cat.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(2 * s.hidden));
  c.cat.leftCols(static_cast<Eigen::Index>(s.hidden)) = c.h_seq;
  c.cat.rightCols(static_cast<Eigen::Index>(s.hidden)) = c.h2;
  c.out.noalias() = c.cat * as_matrix(stack.weights(I::kHead), 2 * s.hidden, s.outputs);
  c.out.rowwise() += as_row(stack.bias(I::kHead));
}

// Scratch for the backward pass; reused across calls to avoid re-allocating
// multi-megabyte temporaries every batch.
struct BackwardScratch {
  Mat d_cat, d_h2, d_h1, d_hseq, d_flat;
};

// Overwrites `grad` with dLoss/dParams given dLoss/dOut.
void trunk_backward(const LayerStack& stack, const TrunkCache& c, const Mat& d_out, LayerStack& grad, BackwardScratch& w) {
  using I = LayerStack::Index;
  const auto& s = stack.shape();
  const auto B = static_cast<Eigen::Index>(c.out.rows());
  const auto H = static_cast<Eigen::Index>(s.hidden);
  const auto LF = static_cast<Eigen::Index>(s.seq_len * s.filters);

  as_matrix(grad.weights(I::kHead), 2 * s.hidden, s.outputs).noalias() = c.cat.transpose() * d_out;
  as_row(grad.bias(I::kHead)) = d_out.colwise().sum();
  w.d_cat.noalias() = d_out * as_matrix(stack.weights(I::kHead), 2 * s.hidden, s.outputs).transpose();

  w.d_h2 = w.d_cat.rightCols(H);
  relu_backward(w.d_h2, c.h2);
  as_matrix(grad.weights(I::kScalarDense2), s.hidden, s.hidden).noalias() = c.h1.transpose() * w.d_h2;
  as_row(grad.bias(I::kScalarDense2)) = w.d_h2.colwise().sum();
  w.d_h1.noalias() = w.d_h2 * as_matrix(stack.weights(I::kScalarDense2), s.hidden, s.hidden).transpose();
  relu_backward(w.d_h1, c.h1);
  as_matrix(grad.weights(I::kScalarDense1), s.scalar_inputs, s.hidden).noalias() = c.scal.transpose() * w.d_h1;
  as_row(grad.bias(I::kScalarDense1)) = w.d_h1.colwise().sum();

  w.d_hseq = w.d_cat.leftCols(H);
  relu_backward(w.d_hseq, c.h_seq);
  const ConstMap flat(c.conv.data(), B, LF);
  as_matrix(grad.weights(I::kSeqDense), s.seq_len * s.filters, s.hidden).noalias() = flat.transpose() * w.d_hseq;
  as_row(grad.bias(I::kSeqDense)) = w.d_hseq.colwise().sum();
  w.d_flat.noalias() = w.d_hseq * as_matrix(stack.weights(I::kSeqDense), s.seq_len * s.filters, s.hidden).transpose();
  // Same storage viewed as [batch * len, filters].
  MutMap d_conv(w.d_flat.data(), B * static_cast<Eigen::Index>(s.seq_len), static_cast<Eigen::Index>(s.filters));
  const ConstMap conv(c.conv.data(), d_conv.rows(), d_conv.cols());
  d_conv = (conv.array() > 0.0).select(d_conv, 0.0);
  as_matrix(grad.weights(I::kConv), s.filters, s.kernel).noalias() = d_conv.transpose() * c.cols;
  as_row(grad.bias(I::kConv)) = d_conv.colwise().sum();
}

struct SoftmaxRow {
  double max_logit = 0.0;
  double log_sum = 0.0;  // log sum exp(z - max) over allowed entries
};

SoftmaxRow softmax_stats(const double* z, const ActionMask& mask) {
  SoftmaxRow r;
  r.max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) r.max_logit = std::max(r.max_logit, z[j]);
  if (!std::isfinite(r.max_logit)) throw DeadEndError("masked_softmax: every action is masked");
  double sum = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) sum += std::exp(z[j] - r.max_logit);
  r.log_sum = std::log(sum);
  return r;
}

Sample single(const Observation& obs, const ActionMask* mask) {
  Sample s;
  s.obs = &obs;
  s.mask = mask;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data) : shape(std::move(dims)), values(std::move(data)) {
  if (product(shape) != values.size()) throw ShapeError("tensor value count does not match its shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
  const auto n = product(dims);
  return Tensor(std::move(dims), std::vector<double>(n, 0.0));
}

Tensor dense_forward(const DenseView& layer, const Tensor& input) {
  if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
    throw ShapeError("dense layer parameter sizes inconsistent with in/out");
  const bool batched = input.shape.size() == 2;
  if (input.shape.empty() || input.shape.size() > 2 || input.shape.back() != layer.in)
    throw ShapeError("dense_forward: input width != layer input width");
  const std::size_t rows = batched ? input.shape[0] : 1;
  Tensor out = Tensor::zeros(batched ? std::vector<std::size_t>{rows, layer.out} : std::vector<std::size_t>{layer.out});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += input.values[r * layer.in + i] * layer.weights[i * layer.out + o];
      out.values[r * layer.out + o] = apply(layer.activation, acc);
    }
  return out;
}

Tensor conv1d_forward(const ConvView& layer, const Tensor& seq) {
  if (layer.weights.size() != layer.filters * layer.kernel * layer.channels || layer.bias.size() != layer.filters)
    throw ShapeError("conv layer parameter sizes inconsistent with filters/kernel/channels");
  if (seq.shape.size() != 2 || seq.shape[1] != layer.channels || seq.shape[0] < 1)
    throw ShapeError("conv1d_forward: expected [length >= 1, channels]");
  const std::size_t len = seq.shape[0];
  const std::size_t pad = layer.kernel / 2;
  Tensor out = Tensor::zeros({len, layer.filters});
  for (std::size_t l = 0; l < len; ++l)
    for (std::size_t f = 0; f < layer.filters; ++f) {
      double acc = layer.bias[f];
      for (std::size_t k = 0; k < layer.kernel; ++k) {
        const auto idx = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
        for (std::size_t ch = 0; ch < layer.channels; ++ch)
          acc += layer.weights[(f * layer.kernel + k) * layer.channels + ch] *
                 seq.values[static_cast<std::size_t>(idx) * layer.channels + ch];
      }
      out.values[l * layer.filters + f] = apply(layer.activation, acc);
    }
  return out;
}

std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& mask) {
  if (logits.size() != mask.size()) throw ShapeError("masked_softmax: logits and mask lengths differ");
  const auto st = softmax_stats(logits.data(), mask);
  std::vector<double> p(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (mask[j]) sum += p[j] = std::exp(logits[j] - st.max_logit);
  for (auto& x : p) x /= sum;
  return p;
}

double ppo_clip_loss(double log_prob_new, double log_prob_old, double advantage, double epsilon) {
  const double ratio = std::exp(log_prob_new - log_prob_old);
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  return -std::min(unclipped, clipped);
}

double mse_loss(double prediction, double target) { return (prediction - target) * (prediction - target); }

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ShapeError("mse_loss: length mismatch");
  if (predictions.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) acc += mse_loss(predictions[k], targets[k]);
  return acc / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------

LayerStack::LayerStack(const TrunkShape& shape) : shape_(shape) {
  if (shape.seq_len == 0 || shape.filters == 0 || shape.hidden == 0 || shape.outputs == 0 || shape.kernel == 0)
    throw ShapeError("trunk dimensions must be positive");
  std::size_t offset = 0;
  auto add = [&](std::string name, LayerKind kind, std::size_t in, std::size_t out, std::size_t kernel, Activation act) {
    LayerSpec l{std::move(name), kind, in, out, kernel, act, offset, in * out * kernel, out};
    offset += l.weight_count + l.bias_count;
    layers_.push_back(std::move(l));
  };
  add("conv", LayerKind::kConv1d, 1, shape.filters, shape.kernel, Activation::kRelu);
  add("seq_dense", LayerKind::kDense, shape.seq_len * shape.filters, shape.hidden, 1, Activation::kRelu);
  add("scalar_dense1", LayerKind::kDense, shape.scalar_inputs, shape.hidden, 1, Activation::kRelu);
  add("scalar_dense2", LayerKind::kDense, shape.hidden, shape.hidden, 1, Activation::kRelu);
  add("head", LayerKind::kDense, 2 * shape.hidden, shape.outputs, 1, Activation::kIdentity);
  data_.assign(offset, 0.0);
}

std::span<double> LayerStack::weights(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return std::span<double>(data_).subspan(l.offset, l.weight_count);
}

std::span<double> LayerStack::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return std::span<double>(data_).subspan(l.offset + l.weight_count, l.bias_count);
}

std::span<const double> LayerStack::weights(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return std::span<const double>(data_).subspan(l.offset, l.weight_count);
}

std::span<const double> LayerStack::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return std::span<const double>(data_).subspan(l.offset + l.weight_count, l.bias_count);
}

DenseView LayerStack::dense(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  if (l.kind != LayerKind::kDense) throw ShapeError("layer " + l.name + " is not dense");
  return {l.in, l.out, l.activation, weights(layer), bias(layer)};
}

ConvView LayerStack::conv() const {
  const auto& l = layers_.at(kConv);
  return {l.in, l.out, l.kernel, l.activation, weights(kConv), bias(kConv)};
}

void LayerStack::initialize(Rng& rng, double head_scale) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const double fan_in = static_cast<double>(l.in * l.kernel);
    const double bound = std::sqrt(6.0 / fan_in) * (k == kHead ? head_scale : 1.0);
    for (auto& w : weights(k)) w = rng.uniform(-bound, bound);
    for (auto& b : bias(k)) b = 0.0;
  }
}

void LayerStack::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

PolicyParams::PolicyParams(std::size_t seq_len, std::size_t action_count, std::size_t filters, std::size_t hidden)
    : actor(TrunkShape{seq_len, filters, 3, hidden, 2, action_count}),
      critic(TrunkShape{seq_len, filters, 3, hidden, 2, 1}) {}

void PolicyParams::initialize(RngSeed seed) {
  Rng a(derive_seed(seed, 101));
  Rng c(derive_seed(seed, 202));
  // A small actor head starts the policy close to uniform over allowed actions.
  actor.initialize(a, 0.01);
  critic.initialize(c, 1.0);
}

PolicyParams PolicyParams::zeros_like() const {
  PolicyParams z = *this;
  z.actor.fill(0.0);
  z.critic.fill(0.0);
  return z;
}

ActorOutput actor_forward(const PolicyParams& params, const Observation& obs, const ActionMask& mask) {
  if (mask.size() != params.action_count())
    throw ShapeError("mask length " + std::to_string(mask.size()) + " != actor head width " +
                     std::to_string(params.action_count()));
  const Sample s = single(obs, &mask);
  TrunkCache c;
  trunk_forward(params.actor, std::span<const Sample>(&s, 1), c);
  const double* z = c.out.data();
  const auto st = softmax_stats(z, mask);
  ActorOutput out;
  out.probs.assign(mask.size(), 0.0);
  out.log_probs.assign(mask.size(), 0.0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask[j]) continue;
    out.log_probs[j] = z[j] - st.max_logit - st.log_sum;
    out.probs[j] = std::exp(out.log_probs[j]);
  }
  return out;
}

double critic_forward(const PolicyParams& params, const Observation& obs) {
  const Sample s = single(obs, nullptr);
  TrunkCache c;
  trunk_forward(params.critic, std::span<const Sample>(&s, 1), c);
  return c.out(0, 0);
}

LossReport evaluate_batch(const PolicyParams& params, std::span<const Sample> batch, const LossConfig& cfg,
                          GradientSet* grads) {
  LossReport rep;
  if (batch.empty()) {
    if (grads) *grads = params.zeros_like();
    return rep;
  }
  const auto B = batch.size();
  const double inv_b = 1.0 / static_cast<double>(B);
  const auto m = params.action_count();

  thread_local TrunkCache actor, critic;
  thread_local BackwardScratch scratch;
  trunk_forward(params.actor, batch, actor);
  trunk_forward(params.critic, batch, critic);

  Mat d_logits = Mat::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(m));
  Mat d_value(static_cast<Eigen::Index>(B), 1);
  std::uint64_t sig = 0;
  std::size_t clipped_count = 0;
  std::vector<double> p(m), logp(m);
  for (std::size_t b = 0; b < B; ++b) {
    const Sample& s = batch[b];
    if (s.mask == nullptr || s.mask->size() != m) throw ShapeError("sample mask does not match actor head width");
    if (s.action >= m || !(*s.mask)[s.action]) throw InvalidActionError("sample action is masked");
    const double* z = &actor.out(static_cast<Eigen::Index>(b), 0);
    const auto st = softmax_stats(z, *s.mask);
    double entropy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(*s.mask)[j]) {
        p[j] = logp[j] = 0.0;
        continue;
      }
      logp[j] = z[j] - st.max_logit - st.log_sum;
      p[j] = std::exp(logp[j]);
      entropy -= p[j] * logp[j];
    }

    const double ratio = std::exp(logp[s.action] - s.log_prob_old);
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon) * s.advantage;
    const bool use_unclipped = unclipped <= clipped;
    rep.actor_loss -= std::min(unclipped, clipped) * inv_b;
    rep.entropy += entropy * inv_b;
    rep.mean_ratio += ratio * inv_b;
    if (std::abs(ratio - 1.0) > cfg.epsilon) ++clipped_count;
    sig = fold(sig, use_unclipped ? 1 : 2);

    // d(-min(.))/dlogp_a, then through log-softmax restricted to the mask.
    const double g = use_unclipped ? -ratio * s.advantage * inv_b : 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(*s.mask)[j]) continue;
      double d = g * ((j == s.action ? 1.0 : 0.0) - p[j]);
      if (cfg.entropy_coef != 0.0) d += cfg.entropy_coef * inv_b * p[j] * (logp[j] + entropy);
      d_logits(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = d;
    }

    const double v = critic.out(static_cast<Eigen::Index>(b), 0);
    rep.critic_loss += mse_loss(v, s.return_target) * inv_b;
    d_value(static_cast<Eigen::Index>(b), 0) = 2.0 * (v - s.return_target) * inv_b;
  }
  rep.actor_loss -= cfg.entropy_coef * rep.entropy;
  rep.clip_fraction = static_cast<double>(clipped_count) * inv_b;

  if (!grads) {
    for (const TrunkCache* c : {&actor, &critic})
      for (const Mat* mm : {&c->conv, &c->h_seq, &c->h1, &c->h2}) sig = sign_hash(sig, *mm);
    rep.kink_signature = sig;
  }

  if (grads) {
    if (!grads->congruent(params)) *grads = params.zeros_like();
    trunk_backward(params.actor, actor, d_logits, grads->actor, scratch);
    trunk_backward(params.critic, critic, d_value, grads->critic, scratch);
  }
  return rep;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::size_t size, Config cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

double Adam::effective_rate(std::size_t step_index) const noexcept {
  return cfg_.lr / (1.0 + cfg_.decay * static_cast<double>(step_index));
}

void Adam::update(std::span<double> params, std::span<const double> grads, std::size_t step_index) {
  update(params, grads, step_index, step_index);
}

void Adam::update(std::span<double> params, std::span<const double> grads, std::size_t step_index, std::size_t decay_index) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("Adam: parameter/gradient size mismatch");
  const double t = static_cast<double>(step_index + 1);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  const double rate = effective_rate(decay_index);
  const auto n = static_cast<Eigen::Index>(params.size());
  Eigen::Map<Eigen::ArrayXd> p(params.data(), n), m(m_.data(), n), v(v_.data(), n);
  const Eigen::Map<const Eigen::ArrayXd> g(grads.data(), n);
  m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
  v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
  p -= rate * (m / c1) / ((v / c2).sqrt() + cfg_.eps);
}

// ---------------------------------------------------------------------------

GradCheckReport compare_gradients(const PolicyParams& params, std::span<const Sample> batch, const LossConfig& cfg,
                                  const GradientSet& analytic, const GradCheckConfig& check) {
  if (!analytic.congruent(params)) throw ShapeError("gradient set is not congruent with parameters");
  GradCheckReport rep;
  rep.parameters = params.size();
  const auto base = evaluate_batch(params, batch, cfg).kink_signature;
  PolicyParams probe = params;

  std::size_t flat = 0;
  for (int which = 0; which < 2; ++which) {
    auto probe_values = which == 0 ? probe.actor.values() : probe.critic.values();
    const auto grad_values = which == 0 ? analytic.actor.values() : analytic.critic.values();
    for (std::size_t k = 0; k < probe_values.size(); ++k, ++flat) {
      const double original = probe_values[k];
      double h = check.step;
      std::optional<double> numeric;
      for (int attempt = 0; attempt < 6; ++attempt, h *= 0.1) {
        probe_values[k] = original + h;
        const auto up = evaluate_batch(probe, batch, cfg);
        probe_values[k] = original - h;
        const auto down = evaluate_batch(probe, batch, cfg);
        probe_values[k] = original;
        if (up.kink_signature == base && down.kink_signature == base) {
          numeric = (up.total() - down.total()) / (2.0 * h);
          break;
        }
        if (attempt == 0) ++rep.refined_steps;
      }
      if (!numeric) {
        ++rep.unresolved_kinks;
        continue;
      }
      const double a = grad_values[k];
      const double err = std::abs(a - *numeric) / std::max({std::abs(a), std::abs(*numeric), check.floor});
      if (err > rep.max_relative_error) {
        rep.max_relative_error = err;
        rep.worst_index = flat;
      }
    }
  }
  rep.passed = rep.max_relative_error < check.tolerance;
  return rep;
}

GradCheckReport finite_difference_check(const PolicyParams& params, std::span<const Sample> batch, const LossConfig& cfg,
                                        const GradCheckConfig& check) {
  GradientSet grads;
  evaluate_batch(params, batch, cfg, &grads);
  return compare_gradients(params, batch, cfg, grads, check);
}

}  // namespace rlap::nn
