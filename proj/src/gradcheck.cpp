#include <algorithm>
#include <cmath>
#include <vector>

#include "vth/features.hpp"
#include "vth/gradcheck.hpp"
#include "vth/mixing.hpp"
#include "vth/pnet.hpp"
#include "vth/rng.hpp"

namespace vth {

nlohmann::json GradcheckReport::to_json() const {
  return {{"seed", seed},
          {"checked", checked},
          {"skipped_kinks", skipped_kinks},
          {"max_rel_error", max_rel_error},
          {"worst_index", worst_index},
          {"worst_analytic", worst_analytic},
          {"worst_numeric", worst_numeric},
          {"passed", passed}};
}

namespace {

struct Problem {
  PNetParams params;
  AugmentedPatch patch;
  double error = 0.0;
  double target = 0.0;
  ForwardMode mode;
};

double loss_at(const Problem& pb, const PNetParams& params, ForwardTrace* trace_out = nullptr) {
  ForwardTrace t = forward(pb.patch, params, pb.mode);
  const double q = predict_quality({pb.error, t.threshold, alpha_of(params), 1.0}).q_hat;
  const double loss = sample_loss(pb.target, q).loss;
  if (trace_out) *trace_out = std::move(t);
  return loss;
}

// Same relu signs and pooling winners everywhere.
bool same_pattern(const ForwardTrace& a, const ForwardTrace& b) {
  auto signs = [](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if ((x[i] > 0.0) != (y[i] > 0.0)) return false;
    return true;
  };
  return signs(a.conv1_pre, b.conv1_pre) && signs(a.conv2_pre, b.conv2_pre) && signs(a.fc1_pre, b.fc1_pre) &&
         a.pool1_arg == b.pool1_arg && a.pool2_arg == b.pool2_arg;
}

Problem make_problem(std::uint64_t seed, bool train_mode) {
  Rng rng(derive_seed(seed, 0x6763));  // "gc"
  Problem pb;
  pb.params = init_params(derive_seed(seed, 1));
  for (auto bias : {pb.params.conv1_b(), pb.params.conv2_b(), pb.params.fc1_b()})
    for (double& b : bias) b = rng.uniform(-0.1, 0.1);
  pb.params.fc2_b() = rng.uniform(-0.5, 0.5);
  pb.params.log_alpha() = rng.uniform(-0.5, 0.5);

  std::vector<double> pixels(arch::kPatch * arch::kPatch);
  for (double& v : pixels) v = rng.uniform();
  const GrayImage img(arch::kPatch, arch::kPatch, std::move(pixels));
  pb.patch = augment_patch(default_features(img), img, {0, 0}, arch::kPatch);
  pb.error = rng.uniform(0.02, 0.2);
  pb.mode = train_mode ? ForwardMode::training(derive_seed(seed, 2)) : ForwardMode::eval();

  // Keep the target well away from q_hat so the L1 kink is never crossed.
  const double q = predict_quality({pb.error, forward(pb.patch, pb.params, pb.mode).threshold,
                                    alpha_of(pb.params), 1.0})
                       .q_hat;
  const double gap = rng.uniform(0.1, 0.3);
  pb.target = q + gap <= 1.0 ? q + gap : q - gap;
  return pb;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckOptions& options) {
  const Problem pb = make_problem(options.seed, options.train_mode);

  ForwardTrace base;
  loss_at(pb, pb.params, &base);
  const MixGradient mg =
      grad_wrt_threshold_alpha({pb.error, base.threshold, alpha_of(pb.params), 1.0}, pb.target);
  PNetGrads analytic = backward(base, pb.params, mg.dloss_dthreshold);
  analytic.log_alpha() += mg.dloss_dlog_alpha;
  if (options.corrupt_index) analytic[*options.corrupt_index] *= 2.0;

  // Per-tensor quotas; the scalars are always checked.
  struct Group {
    std::size_t offset, size;
    double share;
  };
  const Group groups[] = {
      {arch::kConv1W, arch::kConv1Weights, 0.18}, {arch::kConv1B, arch::kFilters, 0.09},
      {arch::kConv2W, arch::kConv2Weights, 0.18}, {arch::kConv2B, arch::kFilters, 0.09},
      {arch::kFc1W, arch::kFc1Weights, 0.18},     {arch::kFc1B, arch::kHidden, 0.09},
      {arch::kFc2W, arch::kHidden, 0.18},
  };

  Rng rng(derive_seed(options.seed, 0x636f6f7264));  // "coord"
  GradcheckReport report;
  report.seed = options.seed;

  PNetParams probe = pb.params;
  auto check = [&](std::size_t index) -> bool {
    const double saved = probe[index];
    ForwardTrace plus_t;
    ForwardTrace minus_t;
    probe[index] = saved + options.step;
    const double plus = loss_at(pb, probe, &plus_t);
    probe[index] = saved - options.step;
    const double minus = loss_at(pb, probe, &minus_t);
    probe[index] = saved;
    if (!same_pattern(base, plus_t) || !same_pattern(base, minus_t)) {
      ++report.skipped_kinks;
      return false;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[index];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.scale_floor});
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = rel;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    return true;
  };

  if (options.corrupt_index) check(*options.corrupt_index);
  check(arch::kFc2B);
  check(arch::kLogAlpha);
  const std::size_t budget = std::max<std::size_t>(options.coordinates, 2) - 2;
  for (const Group& g : groups) {
    const auto quota = static_cast<std::size_t>(g.share * static_cast<double>(budget));
    std::size_t done = 0;
    std::size_t attempts = 0;
    while (done < quota && attempts < 20 * quota) {
      ++attempts;
      if (check(g.offset + rng.below(g.size))) ++done;
    }
  }
  // Rounding leftovers go round-robin over the tensors.
  for (std::size_t i = 0, attempts = 0; report.checked < options.coordinates && attempts < 20 * budget + 20;
       ++attempts) {
    const Group& g = groups[i % std::size(groups)];
    if (check(g.offset + rng.below(g.size))) ++i;
  }
  report.passed = report.checked >= options.coordinates && report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace vth
