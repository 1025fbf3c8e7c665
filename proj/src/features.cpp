#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vth/error.hpp"
#include "vth/features.hpp"
#include "vth/kernels.hpp"

namespace vth {

GaussianWindow gaussian_window(std::size_t size, double sigma) {
  if (size < 3 || size % 2 == 0) throw std::invalid_argument("gaussian_window: size must be odd and >= 3");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_window: sigma must be > 0");

  GaussianWindow w;
  w.size = size;
  w.sigma = sigma;
  const double c = static_cast<double>(size - 1) / 2.0;
  w.taps.resize(size);
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w.taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w.taps[i];
  }
  for (double& t : w.taps) t /= sum;
  w.weights.resize(size * size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) w.weights[i * size + j] = w.taps[i] * w.taps[j];
  return w;
}

FeatureMaps local_moments(const GrayImage& img, const GaussianWindow& w) {
  if (w.size > std::min(img.width(), img.height()))
    throw DataError("local_moments: window " + std::to_string(w.size) + " larger than image " +
                    std::to_string(img.width()) + "x" + std::to_string(img.height()));
  Plane sq(img.width(), img.height());
  for (std::size_t i = 0; i < sq.size(); ++i) sq.data[i] = img.values()[i] * img.values()[i];

  FeatureMaps maps;
  kernels::separable_filter(img.plane(), w.taps, maps.mean);
  kernels::separable_filter(sq, w.taps, maps.var);
  for (std::size_t i = 0; i < maps.var.size(); ++i) {
    const double m = maps.mean.data[i];
    maps.var.data[i] = std::max(0.0, maps.var.data[i] - m * m);
  }
  return maps;
}

FeatureMaps mscn_map(const GrayImage& img, const GaussianWindow& w, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("mscn_map: epsilon must be > 0");
  FeatureMaps maps = local_moments(img, w);
  maps.mscn = Plane(img.width(), img.height());
  for (std::size_t i = 0; i < maps.mscn.size(); ++i) {
    maps.mscn.data[i] = (img.values()[i] - maps.mean.data[i]) / (std::sqrt(maps.var.data[i]) + epsilon);
  }
  return maps;
}

FeatureMaps default_features(const GrayImage& img) {
  static const GaussianWindow window = gaussian_window();
  return mscn_map(img, window, kDefaultMscnEpsilon);
}

AugmentedPatch augment_patch(const FeatureMaps& maps, const GrayImage& img, PatchOrigin origin, std::size_t n) {
  if (n == 0 || origin.row + n > img.height() || origin.col + n > img.width())
    throw std::out_of_range("augment_patch: patch at (" + std::to_string(origin.row) + ", " +
                            std::to_string(origin.col) + ") of size " + std::to_string(n) + " outside image");
  if (maps.mscn.width != img.width() || maps.mscn.height != img.height())
    throw std::invalid_argument("augment_patch: feature maps do not match image");

  AugmentedPatch p;
  p.origin = origin;
  p.size = n;
  p.channels.resize(kFeatureChannels * n * n);
  const Plane* planes[kFeatureChannels] = {&img.plane(), &maps.mean, &maps.var, &maps.mscn};
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    double* dst = p.channels.data() + c * n * n;
    for (std::size_t r = 0; r < n; ++r) {
      const double* src = planes[c]->data.data() + (origin.row + r) * img.width() + origin.col;
      std::copy(src, src + n, dst + r * n);
    }
  }
  return p;
}

}  // namespace vth
