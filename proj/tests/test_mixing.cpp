#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vth/mixing.hpp"
#include "vth/rng.hpp"

using namespace vth;

TEST_CASE("mean absolute error") {
  const std::vector<double> zeros(4, 0.0), ramp{0.1, 0.2, 0.3, 0.4}, flat(4, 0.2);
  CHECK(mean_abs_error(ramp, ramp) == 0.0);
  CHECK(mean_abs_error(zeros, flat) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(mean_abs_error(zeros, ramp) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(mean_abs_error(ramp, zeros) == mean_abs_error(zeros, ramp));
  CHECK_THROWS_AS(mean_abs_error(ramp, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("predict_quality analytic values") {
  CHECK(predict_quality({0.0, 0.5, 2.0, 1.0}).q_hat == 0.0);
  CHECK(std::abs(predict_quality({0.3, 0.3, 1.0, 1.0}).q_hat - (1.0 - std::exp(-1.0))) < 1e-12);
  CHECK(std::abs(predict_quality({std::log(2.0), 1.0, 1.0, 1.0}).q_hat - 0.5) < 1e-12);
  CHECK(std::abs(predict_quality({0.1, 0.2, 2.0 * std::log(2.0), 1.0}).q_hat - 0.5) < 1e-12);

  // Analytic derivatives for beta = 1.
  const MixInput m{0.04, 0.07, 1.3, 1.0};
  const double u = m.alpha * m.error / m.threshold;
  const auto out = predict_quality(m);
  CHECK(std::abs(out.dq_dthreshold - (-(m.alpha * m.error / (m.threshold * m.threshold)) * std::exp(-u))) < 1e-12);
  CHECK(std::abs(out.dq_dalpha - (m.error / m.threshold) * std::exp(-u)) < 1e-12);

  // Huge ratios stay finite and below 1.
  const auto big = predict_quality({1.0, 1e-3, 1e6, 1.0});
  CHECK(std::isfinite(big.q_hat));
  CHECK(big.q_hat <= 1.0);
  CHECK(std::isfinite(big.dq_dthreshold));
}

TEST_CASE("quality is monotone and bounded") {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const MixInput m{rng.uniform(1e-4, 0.5), rng.uniform(1e-3, 2.0), std::exp(rng.uniform(-2, 2)), rng.uniform(0.5, 3)};
    const auto o = predict_quality(m);
    CHECK(o.q_hat > 0.0);
    // 1 - e^{-u} rounds to 1 once u exceeds ~37.
    CHECK(o.q_hat <= 1.0);
    if (std::pow(m.alpha * m.error / m.threshold, m.beta) < 30.0) CHECK(o.q_hat < 1.0);
    CHECK(o.dq_dthreshold <= 0.0);
    auto more_e = m, more_t = m, more_a = m;
    more_e.error *= 1.1;
    more_t.threshold *= 1.1;
    more_a.alpha *= 1.1;
    CHECK(predict_quality(more_e).q_hat >= o.q_hat);
    CHECK(predict_quality(more_t).q_hat <= o.q_hat);
    CHECK(predict_quality(more_a).q_hat >= o.q_hat);
  }
}

TEST_CASE("scale absorption") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const MixInput m{rng.uniform(1e-4, 0.5), rng.uniform(1e-3, 2.0), std::exp(rng.uniform(-2, 2)), 1.0};
    const double k = std::exp(rng.uniform(-3, 3));
    const double a = predict_quality(m).q_hat;
    const double b = predict_quality({k * m.error, k * m.threshold, m.alpha, m.beta}).q_hat;
    CHECK(std::abs(a - b) <= 1e-12);
  }
}

TEST_CASE("L1 loss and its subgradient") {
  CHECK(sample_loss(0.3, 0.3).loss == 0.0);
  CHECK(sample_loss(0.3, 0.3).dloss_dqhat == 0.0);
  CHECK(sample_loss(0.2, 0.5).loss == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(sample_loss(0.2, 0.5).dloss_dqhat == 1.0);
  CHECK(sample_loss(0.9, 0.5).loss == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(sample_loss(0.9, 0.5).dloss_dqhat == -1.0);
}

TEST_CASE("threshold and log-alpha gradients match central differences") {
  CHECK(grad_wrt_threshold_alpha({0.0, 0.3, 1.0, 1.0}, 0.4).dloss_dthreshold == 0.0);
  CHECK(grad_wrt_threshold_alpha({0.0, 0.3, 1.0, 1.0}, 0.4).dloss_dlog_alpha == 0.0);
  const MixInput exact{0.3, 0.3, 1.0, 1.0};
  const auto g0 = grad_wrt_threshold_alpha(exact, predict_quality(exact).q_hat);
  CHECK(g0.dloss_dthreshold == 0.0);
  CHECK(g0.dloss_dlog_alpha == 0.0);

  Rng rng(4);
  auto loss = [](double e, double t, double a, double beta, double q) {
    return sample_loss(q, predict_quality({e, t, std::exp(a), beta}).q_hat).loss;
  };
  for (int i = 0; i < 200; ++i) {
    const double e = rng.uniform(0.01, 0.3), t = rng.uniform(0.02, 1.0), a = rng.uniform(-1, 1);
    const double beta = i % 2 ? 1.0 : rng.uniform(0.5, 2.5);
    const double qh = predict_quality({e, t, std::exp(a), beta}).q_hat;
    // Keep the target away from q_hat so the kink is not crossed.
    const double q = std::clamp(qh + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 0.3), 0.0, 1.0);
    if (std::abs(q - qh) < 0.01) continue;
    const auto g = grad_wrt_threshold_alpha({e, t, std::exp(a), beta}, q);
    const double h = 1e-6;
    const double fd_t = (loss(e, t + h, a, beta, q) - loss(e, t - h, a, beta, q)) / (2 * h);
    const double fd_a = (loss(e, t, a + h, beta, q) - loss(e, t, a - h, beta, q)) / (2 * h);
    CHECK(std::abs(g.dloss_dthreshold - fd_t) <= 1e-6 * std::max(std::abs(fd_t), 1e-3));
    CHECK(std::abs(g.dloss_dlog_alpha - fd_a) <= 1e-6 * std::max(std::abs(fd_a), 1e-3));
  }
}
