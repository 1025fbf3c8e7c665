#include <cmath>
#include <stdexcept>

#include "vth/mixing.hpp"

namespace vth {

double mean_abs_error(std::span<const double> ref_patch, std::span<const double> dist_patch) {
  if (ref_patch.size() != dist_patch.size() || ref_patch.empty())
    throw std::invalid_argument("mean_abs_error: patches differ in size");
  double sum = 0.0;
  for (std::size_t k = 0; k < ref_patch.size(); ++k) sum += std::abs(dist_patch[k] - ref_patch[k]);
  return sum / static_cast<double>(ref_patch.size());
}

MixOutput predict_quality(const MixInput& m) {
  const double u = m.alpha * m.error / m.threshold;
  MixOutput out;
  if (u == 0.0) return out;
  const double ub = m.beta == 1.0 ? u : std::pow(u, m.beta);
  const double survival = std::exp(-ub);
  out.q_hat = -std::expm1(-ub);
  // d(u^beta)/du = beta * u^(beta - 1); du/dT = -u/T, du/dalpha = u/alpha.
  const double dub_du = m.beta == 1.0 ? 1.0 : m.beta * ub / u;
  out.dq_dthreshold = -survival * dub_du * u / m.threshold;
  out.dq_dalpha = survival * dub_du * u / m.alpha;
  return out;
}

LossValue sample_loss(double q_target, double q_hat) {
  const double diff = q_hat - q_target;
  return {std::abs(diff), diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)};
}

MixGradient grad_wrt_threshold_alpha(const MixInput& m, double q_target) {
  const MixOutput q = predict_quality(m);
  const LossValue l = sample_loss(q_target, q.q_hat);
  return {l.dloss_dqhat * q.dq_dthreshold, l.dloss_dqhat * q.dq_dalpha * m.alpha};
}

}  // namespace vth
