#include <stdexcept>
#include <cmath>
#include <random>

#include "cachelab/tensor.hpp"
#include "doctest.h"

using namespace cachelab;

TEST_CASE("tensor shapes and row access") {
  Tensor t({3, 4});
  CHECK(t.size() == 12);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  t.row(1)[2] = 5.0;
  CHECK(t.values[1 * 4 + 2] == 5.0);

  Tensor v({6});
  CHECK(v.cols() == 1);
  CHECK(v.rows() == 6);
  CHECK(shape_size({2, 3, 4}) == 24);
}

TEST_CASE("parameter store keeps name order and zeroes gradients") {
  ParameterStore store;
  store.add("b.second", {2});
  store.add("a.first", {3});
  store.add("c.third", {1});
  CHECK(store.count() == 3);
  CHECK(store.total_values() == 6);

  std::vector<std::string> order;
  for (const auto& [name, p] : store) order.push_back(name);
  CHECK(order == std::vector<std::string>{"a.first", "b.second", "c.third"});

  store.at("a.first").grad.fill(7.0);
  store.zero_grad();
  for (double g : store.at("a.first").grad.values) CHECK(g == 0.0);

  CHECK_THROWS_AS(store.at("missing"), std::out_of_range);
  CHECK_THROWS_AS(store.add("a.first", {3}), std::invalid_argument);
}

TEST_CASE("glorot init stays within the fan bound and is seed-deterministic") {
  Tensor a({64, 32}), b({64, 32});
  std::mt19937_64 rng1(5), rng2(5);
  glorot_uniform(a, rng1);
  glorot_uniform(b, rng2);
  CHECK(a.values == b.values);
  const double bound = std::sqrt(6.0 / (64 + 32));
  double max_abs = 0, mean = 0;
  for (double v : a.values) {
    max_abs = std::max(max_abs, std::abs(v));
    mean += v;
  }
  CHECK(max_abs <= bound);
  CHECK(max_abs > bound * 0.8);  // actually spreads across the range
  CHECK(std::abs(mean / a.size()) < bound * 0.1);
}

TEST_CASE("adam matches a hand-computed first step") {
  ParameterStore store;
  auto& p = store.add("w", {2});
  p.value.values = {1.0, -2.0};
  p.grad.values = {0.5, -1.5};

  AdamConfig config;
  config.learning_rate = 0.1;
  AdamState adam(store, config);
  adam.step(store);

  // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  const double e = config.epsilon;
  CHECK(p.value.values[0] ==
        doctest::Approx(1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + e)));
  CHECK(p.value.values[1] ==
        doctest::Approx(-2.0 + 0.1 * 1.5 / (std::sqrt(2.25) + e)));
  CHECK(adam.step_count() == 1);
  // Gradients were consumed.
  CHECK(p.grad.values == std::vector<double>{0.0, 0.0});

  SUBCASE("second step applies momentum") {
    p.grad.values = {0.5, -1.5};
    adam.step(store);
    CHECK(adam.step_count() == 2);
    // Same gradient twice: bias-corrected m and v equal g and g^2 again,
    // so the step size repeats.
    CHECK(p.value.values[0] ==
          doctest::Approx(1.0 - 2 * 0.1 * 0.5 / (std::sqrt(0.25) + e))
              .epsilon(1e-6));
  }
}

TEST_CASE("adam global-norm clipping rescales large gradients") {
  ParameterStore big, small;
  big.add("w", {2}).grad.values = {3.0, 4.0};  // norm 5
  big.at("w").value.values = {0.0, 0.0};
  small.add("w", {2}).grad.values = {0.6, 0.8};  // norm 1 (already under)
  small.at("w").value.values = {0.0, 0.0};

  AdamConfig config;
  config.learning_rate = 0.001;
  config.clip_norm = 1.0;
  AdamState adam_big(big, config), adam_small(small, config);
  adam_big.step(big);
  adam_small.step(small);
  // Clipping 5 -> 1 makes both gradients identical, so updates match.
  CHECK(big.at("w").value.values[0] ==
        doctest::Approx(small.at("w").value.values[0]));
  CHECK(big.at("w").value.values[1] ==
        doctest::Approx(small.at("w").value.values[1]));
}

TEST_CASE("grad_check passes analytic gradients and flags wrong ones") {
  ParameterStore store;
  auto& p = store.add("w", {3});
  p.value.values = {0.3, -0.7, 1.2};

  // f(w) = sum(w_i^3); df/dw_i = 3 w_i^2.
  const auto good = [&](bool compute) {
    double f = 0;
    for (size_t i = 0; i < 3; ++i) {
      const double w = store.at("w").value.values[i];
      f += w * w * w;
      if (compute) store.at("w").grad.values[i] += 3 * w * w;
    }
    return f;
  };
  const GradCheckReport ok = grad_check(good, store, 1e-6);
  CHECK(ok.passed);
  CHECK(ok.max_rel_error < 1e-6);

  const auto bad = [&](bool compute) {
    double f = 0;
    for (size_t i = 0; i < 3; ++i) {
      const double w = store.at("w").value.values[i];
      f += w * w * w;
      if (compute) store.at("w").grad.values[i] += 2.5 * w * w;  // wrong
    }
    return f;
  };
  const GradCheckReport caught = grad_check(bad, store, 1e-6);
  CHECK(!caught.passed);
  CHECK(caught.worst_param == "w");
}
