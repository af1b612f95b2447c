#include <cmath>

#include "doctest.h"
#include "rlap/neuralnet.hpp"

using namespace rlap;
using namespace rlap::nn;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

double relu(double x) { return x > 0 ? x : 0.0; }

// Straightforward loops over the documented layout; independent of the Eigen path.
std::vector<double> naive_trunk(const LayerStack& st, const Observation& obs) {
  const auto& s = st.shape();
  const std::size_t L = s.seq_len, F = s.filters, pad = s.kernel / 2;
  const auto cw = st.weights(LayerStack::kConv), cb = st.bias(LayerStack::kConv);
  std::vector<double> flat(L * F);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t f = 0; f < F; ++f) {
      double acc = cb[f];
      for (std::size_t k = 0; k < s.kernel; ++k) {
        const auto pos = static_cast<long>(t + k) - static_cast<long>(pad);
        if (pos >= 0 && pos < static_cast<long>(L)) acc += cw[f * s.kernel + k] * obs.seq[static_cast<std::size_t>(pos)];
      }
      flat[t * F + f] = relu(acc);
    }
  auto dense = [&](std::size_t layer, const std::vector<double>& x, bool act) {
    const auto w = st.weights(layer), b = st.bias(layer);
    const std::size_t out = b.size();
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w[i * out + o];
      y[o] = act ? relu(acc) : acc;
    }
    return y;
  };
  const auto hs = dense(LayerStack::kSeqDense, flat, true);
  const auto h1 = dense(LayerStack::kScalarDense1, {obs.scalars[0], obs.scalars[1]}, true);
  const auto h2 = dense(LayerStack::kScalarDense2, h1, true);
  std::vector<double> cat = hs;
  cat.insert(cat.end(), h2.begin(), h2.end());
  return dense(LayerStack::kHead, cat, false);
}

struct SmallCase {
  PolicyParams params;
  std::vector<Observation> obs;
  std::vector<ActionMask> masks;
  std::vector<Sample> batch;
};

SmallCase small_case(RngSeed seed, std::size_t batch_size = 6) {
  Rng rng(seed);
  SmallCase c;
  const std::size_t n = 3, m = 3;
  c.params = PolicyParams(n + m, m, 3, 5);
  c.params.initialize(seed);
  for (auto* st : {&c.params.actor, &c.params.critic})
    for (std::size_t l = 0; l < LayerStack::kLayerCount; ++l)
      for (auto& b : st->bias(l)) b = rng.uniform(-0.3, 0.3);
  for (auto& w : c.params.actor.weights(LayerStack::kHead)) w *= 50;
  c.obs.resize(batch_size);
  c.masks.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    c.obs[i].seq = random_values(rng, n + m);
    c.obs[i].scalars = {rng.uniform01(), rng.uniform01()};
    c.masks[i].allowed = {true, rng.uniform01() < 0.5, true};
  }
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto out = actor_forward(c.params, c.obs[i], c.masks[i]);
    const std::size_t a = i % 2 == 0 ? 0 : 2;
    c.batch.push_back({&c.obs[i], &c.masks[i], a, out.log_probs[a] + rng.uniform(-0.3, 0.3), rng.uniform(-2, 2),
                       rng.uniform(-2, 2)});
  }
  return c;
}

}  // namespace

TEST_CASE("dense_forward") {
  SUBCASE("identity with relu") {
    const std::vector<double> w{1, 0, 0, 1}, b{0, 0};
    const auto y = dense_forward({2, 2, Activation::kRelu, w, b}, Tensor({2}, {1, -2}));
    CHECK(y.values == std::vector<double>{1, 0});
  }
  SUBCASE("constant map") {
    const std::vector<double> w{0, 0}, b{3};
    CHECK(dense_forward({2, 1, Activation::kIdentity, w, b}, Tensor({2}, {7, -9})).values == std::vector<double>{3});
  }
  SUBCASE("matches a hand-written product") {
    Rng rng(1);
    const auto w = random_values(rng, 12), b = random_values(rng, 3), x = random_values(rng, 8);
    const auto y = dense_forward({4, 3, Activation::kIdentity, w, b}, Tensor({2, 4}, x));
    REQUIRE(y.shape == std::vector<std::size_t>{2, 3});
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t o = 0; o < 3; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < 4; ++i) acc += x[r * 4 + i] * w[i * 3 + o];
        CHECK(std::abs(y.values[r * 3 + o] - acc) <= 1e-12);
      }
  }
  SUBCASE("shape mismatch") {
    const std::vector<double> w{1, 0, 0, 1}, b{0, 0};
    CHECK_THROWS_AS(dense_forward({2, 2, Activation::kRelu, w, b}, Tensor({3}, {1, 2, 3})), ShapeError);
  }
}

TEST_CASE("conv1d_forward") {
  SUBCASE("identity kernel") {
    const std::vector<double> w{0, 1, 0}, b{0};
    const auto y = conv1d_forward({1, 1, 3, Activation::kIdentity, w, b}, Tensor({4, 1}, {1, -2, 3, 4}));
    CHECK(y.values == std::vector<double>{1, -2, 3, 4});
  }
  SUBCASE("zero input gives relu(bias)") {
    const std::vector<double> w(6, 0.7), b{-1, 2};
    const auto y = conv1d_forward({1, 2, 3, Activation::kRelu, w, b}, Tensor::zeros({3, 1}));
    CHECK(y.values == std::vector<double>{0, 2, 0, 2, 0, 2});
  }
  SUBCASE("matches a sliding-window sum") {
    Rng rng(2);
    const std::size_t L = 7, C = 2, F = 3, K = 3;
    const auto w = random_values(rng, F * K * C), b = random_values(rng, F), x = random_values(rng, L * C);
    const auto y = conv1d_forward({C, F, K, Activation::kIdentity, w, b}, Tensor({L, C}, x));
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t f = 0; f < F; ++f) {
        double acc = b[f];
        for (std::size_t k = 0; k < K; ++k) {
          const long pos = static_cast<long>(t + k) - 1;
          if (pos < 0 || pos >= static_cast<long>(L)) continue;
          for (std::size_t c = 0; c < C; ++c) acc += w[(f * K + k) * C + c] * x[static_cast<std::size_t>(pos) * C + c];
        }
        CHECK(std::abs(y.values[t * F + f] - acc) <= 1e-12);
      }
  }
  SUBCASE("shape mismatch") {
    const std::vector<double> w{0, 1, 0}, b{0};
    CHECK_THROWS_AS(conv1d_forward({1, 1, 3, Activation::kIdentity, w, b}, Tensor({2, 2}, {1, 2, 3, 4})), ShapeError);
  }
}

TEST_CASE("masked_softmax") {
  const std::vector<double> zeros{0, 0, 0};
  CHECK(masked_softmax(zeros, {{true, false, true}}) == std::vector<double>{0.5, 0.0, 0.5});
  CHECK(masked_softmax(std::vector<double>{0, 0}, {{true, true}}) == std::vector<double>{0.5, 0.5});
  const auto p = masked_softmax(std::vector<double>{1000, 999}, {{true, true}});
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));
  CHECK_THROWS_AS(masked_softmax(zeros, {{false, false, false}}), DeadEndError);
  CHECK_THROWS_AS(masked_softmax(zeros, {{true, true}}), ShapeError);
}

TEST_CASE("ppo_clip_loss and mse_loss") {
  CHECK(ppo_clip_loss(std::log(1.5), 0.0, 2.0, 0.2) == doctest::Approx(-2.4).epsilon(1e-14));
  CHECK(ppo_clip_loss(0.3, 0.3, 1.7, 0.2) == -1.7);
  CHECK(ppo_clip_loss(std::log(0.5), 0.0, -1.0, 0.2) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(mse_loss(3.0, 3.0) == 0.0);
  CHECK(mse_loss(0.0, 2.0) == 4.0);
  CHECK(mse_loss(std::vector<double>{0, 0}, std::vector<double>{1, 3}) == 5.0);
}

TEST_CASE("actor and critic forward") {
  PolicyParams params(6, 3, 4, 6);
  params.initialize(3);
  Observation obs;
  obs.seq = {0.2, 0.5, 1.0, 1.0, 0.4, 0.0};
  obs.scalars = {0.3, 0.5};

  SUBCASE("single allowed action is one-hot") {
    const auto out = actor_forward(params, obs, {{false, true, false}});
    CHECK(out.probs == std::vector<double>{0, 1, 0});
  }
  SUBCASE("zero head gives uniform / zero value") {
    for (auto& w : params.actor.weights(LayerStack::kHead)) w = 0;
    for (auto& w : params.critic.weights(LayerStack::kHead)) w = 0;
    const auto out = actor_forward(params, obs, {{true, false, true}});
    CHECK(out.probs == std::vector<double>{0.5, 0, 0.5});
    CHECK(critic_forward(params, obs) == 0.0);
  }
  SUBCASE("agrees with a naive forward pass") {
    Rng rng(4);
    for (auto* st : {&params.actor, &params.critic}) {
      for (auto& v : st->values()) v = rng.uniform(-0.5, 0.5);
    }
    const auto logits = naive_trunk(params.actor, obs);
    const auto out = actor_forward(params, obs, {{true, true, true}});
    double z = 0;
    for (auto l : logits) z += std::exp(l);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(out.probs[j] - std::exp(logits[j]) / z) <= 1e-12);
    CHECK(std::abs(critic_forward(params, obs) - naive_trunk(params.critic, obs)[0]) <= 1e-12);
  }
  SUBCASE("shape errors") {
    Observation bad = obs;
    bad.seq.pop_back();
    CHECK_THROWS_AS(critic_forward(params, bad), ShapeError);
    CHECK_THROWS_AS(actor_forward(params, obs, {{true, true}}), ShapeError);
  }
}

TEST_CASE("evaluate_batch gradients") {
  SUBCASE("zero advantages leave the actor gradient at zero") {
    auto c = small_case(5);
    for (auto& s : c.batch) s.advantage = 0;
    GradientSet g;
    evaluate_batch(c.params, c.batch, {}, &g);
    for (auto v : g.actor.values()) CHECK(v == 0.0);
    bool critic_moves = false;
    for (auto v : g.critic.values()) critic_moves |= v != 0.0;
    CHECK(critic_moves);
  }
  SUBCASE("critic head gradient has the closed form") {
    auto c = small_case(6, 1);
    GradientSet g;
    evaluate_batch(c.params, c.batch, {}, &g);
    const double pred = critic_forward(c.params, c.obs[0]);
    const double d = 2 * (pred - c.batch[0].return_target);
    const auto head_bias = g.critic.bias(LayerStack::kHead);
    CHECK(head_bias[0] == doctest::Approx(d).epsilon(1e-12));
  }
  SUBCASE("finite differences agree on random small nets") {
    for (RngSeed s = 10; s < 15; ++s) {
      auto c = small_case(s);
      LossConfig cfg;
      cfg.entropy_coef = s % 2 == 0 ? 0.0 : 0.05;
      const auto rep = finite_difference_check(c.params, c.batch, cfg);
      CHECK(rep.passed);
      CHECK(rep.max_relative_error < 1e-4);
      CHECK(rep.parameters == c.params.size());
    }
  }
  SUBCASE("a doubled gradient is caught") {
    auto c = small_case(20);
    GradientSet g;
    evaluate_batch(c.params, c.batch, {}, &g);
    for (auto& v : g.actor.values()) v *= 2;
    for (auto& v : g.critic.values()) v *= 2;
    const auto rep = compare_gradients(c.params, c.batch, {}, g);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_relative_error > 0.3);
  }
  SUBCASE("an empty network passes vacuously") {
    const std::vector<Sample> none;
    const auto rep = compare_gradients(PolicyParams{}, none, {}, PolicyParams{});
    CHECK(rep.passed);
    CHECK(rep.parameters == 0);
  }
}

TEST_CASE("Adam") {
  Adam opt(3, {});
  CHECK(opt.effective_rate(0) == 1e-4);
  CHECK(opt.effective_rate(1000) == doctest::Approx(5e-5).epsilon(1e-15));
  std::vector<double> p{1, 2, 3};
  const std::vector<double> zero(3, 0.0);
  opt.update(p, zero, 0);
  CHECK(p == std::vector<double>{1, 2, 3});
  const std::vector<double> g{1, -1, 0};
  opt.update(p, g, 1);
  CHECK(p[0] < 1);
  CHECK(p[1] > 2);
  CHECK(p[2] == 3);
  CHECK_THROWS_AS(opt.update(p, std::vector<double>{1}, 2), ShapeError);
}

TEST_CASE("initialization is seeded") {
  PolicyParams a(12, 6), b(12, 6);
  a.initialize(9);
  b.initialize(9);
  CHECK(a == b);
  b.initialize(10);
  CHECK_FALSE(a == b);
  CHECK(a.zeros_like().congruent(a));
}
