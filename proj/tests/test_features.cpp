#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "vth/error.hpp"
#include "vth/features.hpp"

using namespace vth;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("gaussian window") {
  for (std::size_t m : {3u, 5u, 7u, 11u}) {
    for (double s : {0.3, 1.0, 7.0 / 6.0, 4.0}) {
      const auto w = gaussian_window(m, s);
      double total = 0.0;
      for (double v : w.weights) {
        total += v;
        CHECK(v > 0.0);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double v = w.weights[i * m + j];
          CHECK(v == doctest::Approx(w.weights[i * m + (m - 1 - j)]).epsilon(1e-14));
          CHECK(v == doctest::Approx(w.weights[(m - 1 - i) * m + j]).epsilon(1e-14));
          CHECK(v == doctest::Approx(w.weights[j * m + i]).epsilon(1e-14));
        }
    }
  }

  const auto flat = gaussian_window(3, 1e6);
  for (double v : flat.weights) CHECK(std::abs(v - 1.0 / 9.0) < 1e-6);

  const auto w7 = gaussian_window();
  CHECK(w7.size == 7);
  const auto direct = oracle::gaussian2d(7, 7.0 / 6.0);
  CHECK(std::abs(w7.weights[3 * 7 + 3] - direct[3 * 7 + 3]) < 1e-15);
  CHECK(max_abs_diff(w7.weights, direct) < 1e-15);

  CHECK_THROWS_AS(gaussian_window(4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_window(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_window(5, 0.0), std::invalid_argument);
}

TEST_CASE("constant image has flat moments and zero MSCN") {
  const auto img = GrayImage::constant(12, 9, 0.37);
  const auto maps = mscn_map(img, gaussian_window());
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    CHECK(std::abs(maps.mean.data[i] - 0.37) < 1e-12);
    CHECK(std::abs(maps.var.data[i]) < 1e-12);
    CHECK(maps.var.data[i] >= 0.0);
    CHECK(std::abs(maps.mscn.data[i]) < 1e-9);
  }
  CHECK(maps.mean.width == 12);
  CHECK(maps.var.height == 9);
  CHECK(maps.mscn.size() == img.values().size());
}

TEST_CASE("moments and MSCN match the nested-loop oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto img = oracle::random_image(16, 16, seed);
    const auto maps = mscn_map(img, gaussian_window(7, 7.0 / 6.0), 0.01);
    const auto ref = oracle::moments(img, 7, 7.0 / 6.0, 0.01);
    CHECK(max_abs_diff(maps.mean.data, ref.mean) < 1e-10);
    CHECK(max_abs_diff(maps.var.data, ref.var) < 1e-10);
    CHECK(max_abs_diff(maps.mscn.data, ref.mscn) < 1e-10);
  }
  // Non-square, window equal to the short side, other window sizes.
  const auto img = oracle::random_image(23, 7, 99);
  for (std::size_t m : {3u, 5u, 7u}) {
    const auto maps = mscn_map(img, gaussian_window(m, 1.5), 0.05);
    const auto ref = oracle::moments(img, m, 1.5, 0.05);
    CHECK(max_abs_diff(maps.mean.data, ref.mean) < 1e-10);
    CHECK(max_abs_diff(maps.var.data, ref.var) < 1e-10);
    CHECK(max_abs_diff(maps.mscn.data, ref.mscn) < 1e-10);
  }
}

TEST_CASE("window larger than image is a data error") {
  CHECK_THROWS_AS(local_moments(oracle::random_image(6, 20, 1), gaussian_window(7, 1.0)), DataError);
  CHECK_NOTHROW(local_moments(oracle::random_image(7, 7, 1), gaussian_window(7, 1.0)));
}

TEST_CASE("shift invariance of the variance") {
  Rng rng(5);
  std::vector<double> base(20 * 14), shifted(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = 0.6 * rng.uniform();
    shifted[i] = base[i] + 0.25;
  }
  const auto a = local_moments(GrayImage(20, 14, base), gaussian_window());
  const auto b = local_moments(GrayImage(20, 14, shifted), gaussian_window());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(std::abs(b.mean.data[i] - a.mean.data[i] - 0.25) < 1e-12);
    CHECK(std::abs(b.var.data[i] - a.var.data[i]) < 1e-12);
  }
}

TEST_CASE("MSCN is nearly scale invariant with a tiny epsilon") {
  // Checkerboard plus noise keeps the local variance well above 1e-4.
  Rng rng(8);
  std::vector<double> v(16 * 16), half(v.size());
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      v[y * 16 + x] = ((x + y) % 2 ? 0.8 : 0.2) + 0.1 * rng.uniform();
      half[y * 16 + x] = 0.5 * v[y * 16 + x];
    }
  const auto w = gaussian_window();
  const auto a = mscn_map(GrayImage(16, 16, v), w, 1e-12);
  const auto b = mscn_map(GrayImage(16, 16, half), w, 1e-12);
  REQUIRE(*std::min_element(a.var.data.begin(), a.var.data.end()) >= 1e-4);
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    worst = std::max(worst, std::abs(a.mscn.data[i] - b.mscn.data[i]) / std::max(std::abs(a.mscn.data[i]), 1e-3));
  CHECK(worst < 1e-3);
}

TEST_CASE("variance is never negative") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<double> v(10 * 10);
    for (double& x : v) x = rng.uniform() < 0.5 ? 0.0 : 1e-9 * rng.uniform();
    const auto maps = local_moments(GrayImage(10, 10, v), gaussian_window());
    CHECK(*std::min_element(maps.var.data.begin(), maps.var.data.end()) >= 0.0);
  }
}

TEST_CASE("augmented patch crops all four planes") {
  const auto img = oracle::random_image(40, 36, 4);
  const auto maps = default_features(img);
  const auto p = augment_patch(maps, img, {3, 5}, 32);
  CHECK(p.size == 32);
  CHECK(p.channels.size() == 4 * 32 * 32);
  CHECK(p.origin == PatchOrigin{3, 5});
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) {
      const std::size_t k = y * 32 + x;
      CHECK(p.channel(0)[k] == img.at(3 + y, 5 + x));
      CHECK(p.channel(1)[k] == maps.mean.at(3 + y, 5 + x));
      CHECK(p.channel(2)[k] == maps.var.at(3 + y, 5 + x));
      CHECK(p.channel(3)[k] == maps.mscn.at(3 + y, 5 + x));
    }

  const auto full_img = oracle::random_image(32, 32, 6);
  const auto full_maps = default_features(full_img);
  const auto full = augment_patch(full_maps, full_img, {0, 0}, 32);
  CHECK(std::equal(full.channel(3).begin(), full.channel(3).end(), full_maps.mscn.data.begin()));

  const auto flat = GrayImage::constant(32, 32, 0.6);
  const auto fp = augment_patch(default_features(flat), flat, {0, 0}, 32);
  for (std::size_t k = 0; k < 32 * 32; ++k) {
    CHECK(fp.channel(0)[k] == 0.6);
    CHECK(std::abs(fp.channel(1)[k] - 0.6) < 1e-12);
    CHECK(std::abs(fp.channel(2)[k]) < 1e-12);
    CHECK(std::abs(fp.channel(3)[k]) < 1e-9);
  }

  CHECK_THROWS_AS(augment_patch(maps, img, {5, 0}, 32), std::out_of_range);
  CHECK_THROWS_AS(augment_patch(maps, img, {0, 9}, 32), std::out_of_range);
}
