#pragma once

// The P-net: a small CNN mapping a 4-channel 32x32 augmented patch to a
// positive visibility threshold T.
//
//   conv 4->32 5x5 valid -> relu -> maxpool 2x2
//   conv 32->32 5x5 valid -> relu -> maxpool 2x2
//   flatten (800) -> fc 100 -> relu -> dropout 0.5 (train only)
//   fc 1 -> z -> T = softplus(z) + kMinThreshold
//
// The parameter vector also carries a = log(alpha), the global scale of the
// quality mixing function, so optimizer and checkpoint see one flat array.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vth/features.hpp"

namespace vth {

namespace arch {
inline constexpr std::size_t kPatch = 32;
inline constexpr std::size_t kInChannels = kFeatureChannels;
inline constexpr std::size_t kFilters = 32;
inline constexpr std::size_t kKernel = 5;
inline constexpr std::size_t kConv1Out = kPatch - kKernel + 1;  // 28
inline constexpr std::size_t kPool1 = kConv1Out / 2;             // 14
inline constexpr std::size_t kConv2Out = kPool1 - kKernel + 1;   // 10
inline constexpr std::size_t kPool2 = kConv2Out / 2;             // 5
inline constexpr std::size_t kFlat = kFilters * kPool2 * kPool2;  // 800
inline constexpr std::size_t kHidden = 100;
inline constexpr double kDropoutRate = 0.5;
inline constexpr double kMinThreshold = 1e-3;

inline constexpr std::size_t kConv1Weights = kFilters * kInChannels * kKernel * kKernel;
inline constexpr std::size_t kConv2Weights = kFilters * kFilters * kKernel * kKernel;
inline constexpr std::size_t kFc1Weights = kHidden * kFlat;

// Offsets into the flat parameter vector, in checkpoint order.
inline constexpr std::size_t kConv1W = 0;
inline constexpr std::size_t kConv1B = kConv1W + kConv1Weights;
inline constexpr std::size_t kConv2W = kConv1B + kFilters;
inline constexpr std::size_t kConv2B = kConv2W + kConv2Weights;
inline constexpr std::size_t kFc1W = kConv2B + kFilters;
inline constexpr std::size_t kFc1B = kFc1W + kFc1Weights;
inline constexpr std::size_t kFc2W = kFc1B + kHidden;
inline constexpr std::size_t kFc2B = kFc2W + kHidden;
inline constexpr std::size_t kLogAlpha = kFc2B + 1;
inline constexpr std::size_t kParamCount = kLogAlpha + 1;

static_assert(kParamCount == 4 * 5 * 5 * 32 + 32 + 32 * 5 * 5 * 32 + 32 + 100 * 800 + 100 + 100 + 1 + 1);
}  // namespace arch

// Flat parameter-shaped array with named views. Params and gradients are
// distinct types of the same layout.
template <class Tag>
class ParamArray {
 public:
  ParamArray() : values_(arch::kParamCount, 0.0) {}

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  static constexpr std::size_t size() { return arch::kParamCount; }

  std::span<double> conv1_w() { return slice(arch::kConv1W, arch::kConv1Weights); }
  std::span<double> conv1_b() { return slice(arch::kConv1B, arch::kFilters); }
  std::span<double> conv2_w() { return slice(arch::kConv2W, arch::kConv2Weights); }
  std::span<double> conv2_b() { return slice(arch::kConv2B, arch::kFilters); }
  std::span<double> fc1_w() { return slice(arch::kFc1W, arch::kFc1Weights); }
  std::span<double> fc1_b() { return slice(arch::kFc1B, arch::kHidden); }
  std::span<double> fc2_w() { return slice(arch::kFc2W, arch::kHidden); }
  double& fc2_b() { return values_[arch::kFc2B]; }
  double& log_alpha() { return values_[arch::kLogAlpha]; }

  std::span<const double> conv1_w() const { return slice(arch::kConv1W, arch::kConv1Weights); }
  std::span<const double> conv1_b() const { return slice(arch::kConv1B, arch::kFilters); }
  std::span<const double> conv2_w() const { return slice(arch::kConv2W, arch::kConv2Weights); }
  std::span<const double> conv2_b() const { return slice(arch::kConv2B, arch::kFilters); }
  std::span<const double> fc1_w() const { return slice(arch::kFc1W, arch::kFc1Weights); }
  std::span<const double> fc1_b() const { return slice(arch::kFc1B, arch::kHidden); }
  std::span<const double> fc2_w() const { return slice(arch::kFc2W, arch::kHidden); }
  double fc2_b() const { return values_[arch::kFc2B]; }
  double log_alpha() const { return values_[arch::kLogAlpha]; }

  friend bool operator==(const ParamArray&, const ParamArray&) = default;

 private:
  std::span<double> slice(std::size_t off, std::size_t n) { return std::span<double>(values_).subspan(off, n); }
  std::span<const double> slice(std::size_t off, std::size_t n) const {
    return std::span<const double>(values_).subspan(off, n);
  }

  std::vector<double> values_;
};

struct ParamsTag {};
struct GradsTag {};
using PNetParams = ParamArray<ParamsTag>;
using PNetGrads = ParamArray<GradsTag>;

inline double alpha_of(const PNetParams& p) { return std::exp(p.log_alpha()); }

// He-normal weights (std sqrt(2 / fan_in)), zero biases, a = 0.
PNetParams init_params(std::uint64_t seed);

struct ForwardMode {
  bool train = false;
  std::uint64_t dropout_seed = 0;

  static ForwardMode eval() { return {}; }
  static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

struct ForwardTrace {
  ForwardMode mode;
  std::vector<double> col1;       // im2col of the input, 100 x 784
  std::vector<double> conv1_pre;  // 32 x 28 x 28
  std::vector<double> conv1_act;
  std::vector<double> pool1;      // 32 x 14 x 14
  std::vector<std::uint32_t> pool1_arg;
  std::vector<double> col2;       // 800 x 100
  std::vector<double> conv2_pre;  // 32 x 10 x 10
  std::vector<double> conv2_act;
  std::vector<double> pool2;      // 32 x 5 x 5, doubles as the flattened fc1 input
  std::vector<std::uint32_t> pool2_arg;
  std::vector<double> fc1_pre;    // 100
  std::vector<double> hidden;     // relu(fc1_pre) * dropout_mask
  std::vector<double> dropout_mask;
  double z = 0.0;
  double threshold = 0.0;
};

double softplus(double z);
double sigmoid(double z);

// Throws std::invalid_argument unless the patch is 4 x 32 x 32.
ForwardTrace forward(const AugmentedPatch& patch, const PNetParams& params, ForwardMode mode);

// Adds dL/dtheta to grads by reverse-mode chain rule. The log-alpha slot is
// left untouched; the mixing function supplies that derivative.
// Throws std::invalid_argument if the trace is not a complete forward pass.
void backward(const ForwardTrace& trace, const PNetParams& params, double dloss_dthreshold, PNetGrads& grads);

PNetGrads backward(const ForwardTrace& trace, const PNetParams& params, double dloss_dthreshold);

// Threshold only, eval mode.
double predict_threshold(const AugmentedPatch& patch, const PNetParams& params);

}  // namespace vth
