#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vth/kernels.hpp"
#include "vth/pnet.hpp"
#include "vth/rng.hpp"

namespace vth {

using namespace arch;

PNetParams init_params(std::uint64_t seed) {
  PNetParams p;
  Rng rng(derive_seed(seed));
  auto he = [&rng](std::span<double> w, std::size_t fan_in) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w) v = std_dev * rng.normal();
  };
  he(p.conv1_w(), kInChannels * kKernel * kKernel);
  he(p.conv2_w(), kFilters * kKernel * kKernel);
  he(p.fc1_w(), kFlat);
  he(p.fc2_w(), kHidden);
  return p;
}

double softplus(double z) {
  // ln(1 + e^z) without overflow for large |z|.
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void relu(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::span<const double> pre, std::span<double> grad) {
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (!(pre[i] > 0.0)) grad[i] = 0.0;
}

}  // namespace

ForwardTrace forward(const AugmentedPatch& patch, const PNetParams& params, ForwardMode mode) {
  if (patch.size != kPatch || patch.channels.size() != kInChannels * kPatch * kPatch)
    throw std::invalid_argument("pnet forward: expected a 4 x 32 x 32 patch");

  ForwardTrace t;
  t.mode = mode;
  t.col1.resize(kInChannels * kKernel * kKernel * kConv1Out * kConv1Out);
  t.conv1_pre.resize(kFilters * kConv1Out * kConv1Out);
  t.conv1_act.resize(t.conv1_pre.size());
  t.pool1.resize(kFilters * kPool1 * kPool1);
  t.pool1_arg.resize(t.pool1.size());
  t.col2.resize(kFilters * kKernel * kKernel * kConv2Out * kConv2Out);
  t.conv2_pre.resize(kFilters * kConv2Out * kConv2Out);
  t.conv2_act.resize(t.conv2_pre.size());
  t.pool2.resize(kFlat);
  t.pool2_arg.resize(kFlat);
  t.fc1_pre.resize(kHidden);
  t.hidden.resize(kHidden);
  t.dropout_mask.assign(kHidden, 1.0);

  kernels::conv2d_forward(patch.channels, kInChannels, kPatch, kPatch, params.conv1_w(), params.conv1_b(), kFilters,
                          kKernel, t.col1, t.conv1_pre);
  relu(t.conv1_pre, t.conv1_act);
  kernels::maxpool2x2(t.conv1_act, kFilters, kConv1Out, kConv1Out, t.pool1, t.pool1_arg);

  kernels::conv2d_forward(t.pool1, kFilters, kPool1, kPool1, params.conv2_w(), params.conv2_b(), kFilters, kKernel,
                          t.col2, t.conv2_pre);
  relu(t.conv2_pre, t.conv2_act);
  kernels::maxpool2x2(t.conv2_act, kFilters, kConv2Out, kConv2Out, t.pool2, t.pool2_arg);

  const auto w1 = params.fc1_w();
  const auto b1 = params.fc1_b();
  for (std::size_t i = 0; i < kHidden; ++i) {
    const double* row = w1.data() + i * kFlat;
    t.fc1_pre[i] = std::inner_product(row, row + kFlat, t.pool2.data(), b1[i]);
  }

  if (mode.train) {
    Rng rng(derive_seed(mode.dropout_seed));
    const double keep_scale = 1.0 / (1.0 - kDropoutRate);
    for (double& m : t.dropout_mask) m = rng.uniform() < kDropoutRate ? 0.0 : keep_scale;
  }
  for (std::size_t i = 0; i < kHidden; ++i)
    t.hidden[i] = (t.fc1_pre[i] > 0.0 ? t.fc1_pre[i] : 0.0) * t.dropout_mask[i];

  const auto w2 = params.fc2_w();
  t.z = std::inner_product(w2.begin(), w2.end(), t.hidden.begin(), params.fc2_b());
  t.threshold = softplus(t.z) + kMinThreshold;
  return t;
}

void backward(const ForwardTrace& t, const PNetParams& params, double dloss_dthreshold, PNetGrads& grads) {
  if (t.col1.size() != kInChannels * kKernel * kKernel * kConv1Out * kConv1Out || t.hidden.size() != kHidden ||
      t.pool2.size() != kFlat)
    throw std::invalid_argument("pnet backward: trace does not come from a forward pass of this architecture");
  if (dloss_dthreshold == 0.0) return;

  const double dz = dloss_dthreshold * sigmoid(t.z);

  // fc2
  auto gw2 = grads.fc2_w();
  for (std::size_t i = 0; i < kHidden; ++i) gw2[i] += dz * t.hidden[i];
  grads.fc2_b() += dz;

  // dropout and relu on the hidden layer
  const auto w2 = params.fc2_w();
  std::vector<double> dpre(kHidden);
  for (std::size_t i = 0; i < kHidden; ++i)
    dpre[i] = t.fc1_pre[i] > 0.0 ? dz * w2[i] * t.dropout_mask[i] : 0.0;

  // fc1
  const auto w1 = params.fc1_w();
  auto gw1 = grads.fc1_w();
  auto gb1 = grads.fc1_b();
  std::vector<double> dflat(kFlat, 0.0);
  for (std::size_t i = 0; i < kHidden; ++i) {
    const double g = dpre[i];
    if (g == 0.0) continue;
    gb1[i] += g;
    double* grow = gw1.data() + i * kFlat;
    const double* wrow = w1.data() + i * kFlat;
    for (std::size_t j = 0; j < kFlat; ++j) {
      grow[j] += g * t.pool2[j];
      dflat[j] += g * wrow[j];
    }
  }

  // block 2
  std::vector<double> dconv2(t.conv2_pre.size());
  kernels::maxpool2x2_backward(dflat, t.pool2_arg, dconv2);
  relu_backward(t.conv2_pre, dconv2);
  std::vector<double> dpool1(t.pool1.size());
  std::vector<double> scratch(std::max(t.col1.size(), t.col2.size()));
  kernels::conv2d_backward(dconv2, t.col2, kFilters, kPool1, kPool1, params.conv2_w(), kFilters, kKernel,
                           grads.conv2_w(), grads.conv2_b(), dpool1, scratch);

  // block 1; the input gradient is not needed
  std::vector<double> dconv1(t.conv1_pre.size());
  kernels::maxpool2x2_backward(dpool1, t.pool1_arg, dconv1);
  relu_backward(t.conv1_pre, dconv1);
  kernels::conv2d_backward(dconv1, t.col1, kInChannels, kPatch, kPatch, params.conv1_w(), kFilters, kKernel,
                           grads.conv1_w(), grads.conv1_b(), {}, scratch);
}

PNetGrads backward(const ForwardTrace& trace, const PNetParams& params, double dloss_dthreshold) {
  PNetGrads g;
  backward(trace, params, dloss_dthreshold, g);
  return g;
}

double predict_threshold(const AugmentedPatch& patch, const PNetParams& params) {
  return forward(patch, params, ForwardMode::eval()).threshold;
}

}  // namespace vth
