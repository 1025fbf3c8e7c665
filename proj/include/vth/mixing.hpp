#pragma once

// Quality mixing model: maps a patch's mean absolute error E and its
// threshold T to a predicted local quality
//
//   q_hat = 1 - exp(-(alpha * E / T)^beta),
//
// where 0 means an invisible distortion. The loss against a target score is
// the absolute difference. alpha is learned as a = log(alpha).

#include <span>

namespace vth {

struct MixInput {
  double error = 0.0;      // E >= 0
  double threshold = 1.0;  // T >= T_min
  double alpha = 1.0;
  double beta = 1.0;
};

struct MixOutput {
  double q_hat = 0.0;
  double dq_dthreshold = 0.0;
  double dq_dalpha = 0.0;
};

struct LossValue {
  double loss = 0.0;
  double dloss_dqhat = 0.0;
};

struct MixGradient {
  double dloss_dthreshold = 0.0;
  double dloss_dlog_alpha = 0.0;
};

// Mean of |dist - ref|. Throws std::invalid_argument on a length mismatch.
double mean_abs_error(std::span<const double> ref_patch, std::span<const double> dist_patch);

MixOutput predict_quality(const MixInput& m);

LossValue sample_loss(double q_target, double q_hat);

// Chain rule through predict_quality and sample_loss. The alpha derivative
// is returned with respect to a = log(alpha).
MixGradient grad_wrt_threshold_alpha(const MixInput& m, double q_target);

}  // namespace vth
