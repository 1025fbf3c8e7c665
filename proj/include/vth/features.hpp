#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vth/image.hpp"

namespace vth {

inline constexpr std::size_t kDefaultWindowSize = 7;
inline constexpr double kDefaultWindowSigma = 7.0 / 6.0;
inline constexpr double kDefaultMscnEpsilon = 0.01;
inline constexpr std::size_t kFeatureChannels = 4;

struct GaussianWindow {
  std::size_t size = 0;
  double sigma = 0.0;
  std::vector<double> weights;  // size x size, row-major, sums to 1
  std::vector<double> taps;     // normalized 1-D factor; weights == taps (x) taps
};

// Throws std::invalid_argument for even or < 3 sizes and non-positive sigma.
GaussianWindow gaussian_window(std::size_t size = kDefaultWindowSize, double sigma = kDefaultWindowSigma);

// Per-pixel local statistics of a luminance image. mscn is left empty by
// local_moments and filled by mscn_map.
struct FeatureMaps {
  Plane mean;
  Plane var;
  Plane mscn;
};

// Gaussian-weighted local mean and variance (E[I^2] - E[I]^2, clamped at 0)
// with reflect-101 borders. Throws DataError if the window exceeds the image.
FeatureMaps local_moments(const GrayImage& img, const GaussianWindow& w);

// Adds MSCN = (I - mean) / (sqrt(var) + epsilon).
FeatureMaps mscn_map(const GrayImage& img, const GaussianWindow& w, double epsilon = kDefaultMscnEpsilon);

// Default feature stack used for training and inference.
FeatureMaps default_features(const GrayImage& img);

struct PatchOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

// Network input for one N x N block. Planes in channel-major order:
// luminance, local mean, local variance, MSCN.
struct AugmentedPatch {
  PatchOrigin origin;
  std::size_t size = 0;
  std::vector<double> channels;

  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(channels).subspan(c * size * size, size * size);
  }
};

// Crops all four planes at the same window. Throws std::out_of_range when the
// patch does not fit.
AugmentedPatch augment_patch(const FeatureMaps& maps, const GrayImage& img, PatchOrigin origin, std::size_t n);

}  // namespace vth
