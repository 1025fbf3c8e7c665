#pragma once

// Brute-force reference computations used only by the tests. Everything here
// is written from the definitions with plain loops and shares no code with
// the library beyond the container types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vth/image.hpp"
#include "vth/rng.hpp"

namespace oracle {

inline long mirror(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// exp(-(dx^2+dy^2)/(2 sigma^2)) normalized over the full m x m window.
inline std::vector<double> gaussian2d(std::size_t m, double sigma) {
  std::vector<double> w(m * m);
  const long r = static_cast<long>(m / 2);
  double total = 0.0;
  for (long y = -r; y <= r; ++y)
    for (long x = -r; x <= r; ++x) {
      const double g = std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>((y + r) * static_cast<long>(m) + (x + r))] = g;
      total += g;
    }
  for (double& v : w) v /= total;
  return w;
}

struct Moments {
  std::vector<double> mean, var, mscn;
};

inline Moments moments(const vth::GrayImage& img, std::size_t m, double sigma, double eps) {
  const auto w = gaussian2d(m, sigma);
  const long r = static_cast<long>(m / 2);
  const long W = static_cast<long>(img.width()), H = static_cast<long>(img.height());
  Moments out;
  out.mean.resize(img.values().size());
  out.var.resize(img.values().size());
  out.mscn.resize(img.values().size());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double s1 = 0.0, s2 = 0.0;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const double v = img.at(static_cast<std::size_t>(mirror(y + dy, H)), static_cast<std::size_t>(mirror(x + dx, W)));
          const double wt = w[static_cast<std::size_t>((dy + r) * static_cast<long>(m) + (dx + r))];
          s1 += wt * v;
          s2 += wt * v * v;
        }
      const auto k = static_cast<std::size_t>(y * W + x);
      out.mean[k] = s1;
      out.var[k] = std::max(0.0, s2 - s1 * s1);
      out.mscn[k] = (img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) - s1) / (std::sqrt(out.var[k]) + eps);
    }
  return out;
}

// Valid cross-correlation, (out_c, in_c, k, k) weights.
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t in_c, std::size_t h, std::size_t w,
                                  const std::vector<double>& wt, const std::vector<double>& bias, std::size_t out_c,
                                  std::size_t k) {
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> out(out_c * oh * ow);
  for (std::size_t o = 0; o < out_c; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double s = bias[o];
        for (std::size_t c = 0; c < in_c; ++c)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
              s += wt[((o * in_c + c) * k + i) * k + j] * in[(c * h + y + i) * w + x + j];
        out[(o * oh + y) * ow + x] = s;
      }
  return out;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

inline vth::GrayImage random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  vth::Rng rng(seed);
  std::vector<double> v(w * h);
  for (double& x : v) x = rng.uniform();
  return {w, h, std::move(v)};
}

inline double population_std(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory under the test working directory.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
