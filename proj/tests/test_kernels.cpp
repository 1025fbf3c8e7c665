#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "vth/features.hpp"
#include "vth/kernels.hpp"

using namespace vth;
namespace k = vth::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("reflect101 indexing") {
  CHECK(k::reflect101(-1, 5) == 1);
  CHECK(k::reflect101(-2, 5) == 2);
  CHECK(k::reflect101(5, 5) == 3);
  CHECK(k::reflect101(6, 5) == 2);
  CHECK(k::reflect101(0, 1) == 0);
  for (long n = 2; n < 9; ++n)
    for (long i = -20; i < 30; ++i) CHECK(k::reflect101(i, n) == oracle::mirror(i, n));
}

TEST_CASE("separable filter equals direct 2-D filter") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto img = oracle::random_image(19 + seed, 13, seed);
    for (std::size_t m : {3u, 7u}) {
      const auto w = gaussian_window(m, 1.2);
      Plane fast, slow;
      k::separable_filter(img.plane(), w.taps, fast);
      k::reference::filter2d(img.plane(), w.weights, m, slow);
      CHECK(fast.width == img.width());
      CHECK(fast.height == img.height());
      CHECK(max_abs_diff(fast.data, slow.data) < 1e-13);
    }
  }
}

TEST_CASE("gemm variants against a triple loop") {
  const std::size_t m = 7, n = 5, kk = 9;
  const auto a = randn(m * kk, 1), b = randn(kk * n, 2), bt = randn(m * n, 3);
  std::vector<double> c(m * n, 1.0), want(m * n, 1.0);
  k::gemm_nn(m, n, kk, a.data(), b.data(), c.data(), true);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < kk; ++t) want[i * n + j] += a[i * kk + t] * b[t * n + j];
  CHECK(max_abs_diff(c, want) < 1e-12);

  // A^T B with A m x k, B m x n.
  std::vector<double> d(kk * n, 0.0), want_d(kk * n, 0.0);
  k::gemm_tn(m, n, kk, a.data(), bt.data(), d.data(), false);
  for (std::size_t t = 0; t < kk; ++t)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i) want_d[t * n + j] += a[i * kk + t] * bt[i * n + j];
  CHECK(max_abs_diff(d, want_d) < 1e-12);

  std::vector<double> tr(kk * m);
  k::transpose(m, kk, a.data(), tr.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < kk; ++t) CHECK(tr[t * m + i] == a[i * kk + t]);
}

TEST_CASE("im2col and col2im are adjoint") {
  const std::size_t c = 3, h = 8, w = 7, kk = 3, oh = h - kk + 1, ow = w - kk + 1;
  const auto x = randn(c * h * w, 4), y = randn(c * kk * kk * oh * ow, 5);
  std::vector<double> col(y.size()), back(x.size());
  k::im2col(x, c, h, w, kk, col);
  k::col2im(y, c, h, w, kk, back);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += col[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("convolution forward: fast, reference and naive oracle agree") {
  const std::size_t in_c = 4, h = 12, w = 10, out_c = 6, kk = 5;
  const std::size_t oh = h - kk + 1, ow = w - kk + 1;
  const auto x = randn(in_c * h * w, 10), wt = randn(out_c * in_c * kk * kk, 11), b = randn(out_c, 12);
  std::vector<double> col(in_c * kk * kk * oh * ow), fast(out_c * oh * ow), slow(fast.size());
  k::conv2d_forward(x, in_c, h, w, wt, b, out_c, kk, col, fast);
  k::reference::conv2d_forward(x, in_c, h, w, wt, b, out_c, kk, slow);
  const auto naive = oracle::conv2d(x, in_c, h, w, wt, b, out_c, kk);
  CHECK(max_abs_diff(fast, naive) < 1e-12);
  CHECK(max_abs_diff(slow, naive) < 1e-12);
}

TEST_CASE("convolution backward: fast equals reference and finite differences") {
  const std::size_t in_c = 3, h = 9, w = 9, out_c = 4, kk = 3;
  const std::size_t oh = h - kk + 1, ow = w - kk + 1;
  const auto x = randn(in_c * h * w, 20), wt = randn(out_c * in_c * kk * kk, 21), b = randn(out_c, 22);
  const auto dy = randn(out_c * oh * ow, 23);

  std::vector<double> col(in_c * kk * kk * oh * ow), y(out_c * oh * ow), scratch(col.size());
  k::conv2d_forward(x, in_c, h, w, wt, b, out_c, kk, col, y);

  std::vector<double> dw(wt.size(), 0.0), db(out_c, 0.0), dx(x.size(), 0.0);
  k::conv2d_backward(dy, col, in_c, h, w, wt, out_c, kk, dw, db, dx, scratch);
  std::vector<double> rdw(wt.size(), 0.0), rdb(out_c, 0.0), rdx(x.size(), 0.0);
  k::reference::conv2d_backward(dy, x, in_c, h, w, wt, out_c, kk, rdw, rdb, rdx);
  CHECK(max_abs_diff(dw, rdw) < 1e-12);
  CHECK(max_abs_diff(db, rdb) < 1e-12);
  CHECK(max_abs_diff(dx, rdx) < 1e-12);

  // Loss = <dy, conv(x)>; it is linear in every argument so central
  // differences are exact up to rounding.
  auto loss = [&](const std::vector<double>& xx, const std::vector<double>& ww, const std::vector<double>& bb) {
    const auto out = oracle::conv2d(xx, in_c, h, w, ww, bb, out_c, kk);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * dy[i];
    return s;
  };
  const double step = 1e-3;
  for (std::size_t i : {0u, 17u, 55u, 107u}) {
    auto wp = wt, wm = wt;
    wp[i] += step;
    wm[i] -= step;
    CHECK(dw[i] == doctest::Approx((loss(x, wp, b) - loss(x, wm, b)) / (2 * step)).epsilon(1e-8));
  }
  for (std::size_t i : {0u, 40u, 80u, 242u}) {
    auto xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    CHECK(dx[i] == doctest::Approx((loss(xp, wt, b) - loss(xm, wt, b)) / (2 * step)).epsilon(1e-8));
  }
  for (std::size_t i = 0; i < out_c; ++i) {
    auto bp = b, bm = b;
    bp[i] += step;
    bm[i] -= step;
    CHECK(db[i] == doctest::Approx((loss(x, wt, bp) - loss(x, wt, bm)) / (2 * step)).epsilon(1e-8));
  }

  // Gradients accumulate, and d_in may be skipped.
  std::vector<double> dw2(wt.size(), 0.0), db2(out_c, 0.0);
  k::conv2d_backward(dy, col, in_c, h, w, wt, out_c, kk, dw2, db2, {}, scratch);
  k::conv2d_backward(dy, col, in_c, h, w, wt, out_c, kk, dw2, db2, {}, scratch);
  for (std::size_t i = 0; i < dw.size(); ++i) CHECK(dw2[i] == doctest::Approx(2 * dw[i]).epsilon(1e-12));
}

TEST_CASE("max pooling picks the first maximum and routes gradients to it") {
  // One 4x4 channel; the top-left window is a four-way tie.
  const std::vector<double> in{1, 1, 0, 5,  //
                               1, 1, 2, 3,  //
                               -1, 4, 7, 7,  //
                               4, 0, 7, 6};
  std::vector<double> out(4);
  std::vector<std::uint32_t> arg(4);
  k::maxpool2x2(in, 1, 4, 4, out, arg);
  CHECK(out == std::vector<double>{1, 5, 4, 7});
  CHECK(arg == std::vector<std::uint32_t>{0, 3, 9, 10});

  std::vector<double> rout(4);
  std::vector<std::uint32_t> rarg(4);
  k::reference::maxpool2x2(in, 1, 4, 4, rout, rarg);
  CHECK(rout == out);
  CHECK(rarg == arg);

  std::vector<double> din(16, 0.0);
  k::maxpool2x2_backward(std::vector<double>{1, 2, 3, 4}, arg, din);
  CHECK(din[0] == 1);
  CHECK(din[3] == 2);
  CHECK(din[9] == 3);
  CHECK(din[10] == 4);
  CHECK(std::count(din.begin(), din.end(), 0.0) == 12);
}

TEST_CASE("max pooling agrees with reference on random multichannel input") {
  const auto x = randn(5 * 10 * 10, 30);
  std::vector<double> a(5 * 25), b(5 * 25);
  std::vector<std::uint32_t> ia(a.size()), ib(b.size());
  k::maxpool2x2(x, 5, 10, 10, a, ia);
  k::reference::maxpool2x2(x, 5, 10, 10, b, ib);
  CHECK(a == b);
  CHECK(ia == ib);
}
