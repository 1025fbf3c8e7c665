#include <algorithm>
#include <cassert>
#include <vector>

#include <Eigen/Core>

#include "vth/kernels.hpp"

namespace vth::kernels {

namespace {
// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = std::size_t{1} << 21;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

auto as_matrix(const double* p, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
auto as_matrix(double* p, std::size_t rows, std::size_t cols) {
  return MatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Eigen picks its GEMM blocking from the cache sizes it detects, and the
// blocking fixes the summation order. Pin them so results do not depend on
// the host.
[[maybe_unused]] const bool kPinnedCaches = [] {
  Eigen::setCpuCacheSizes(32 * 1024, 1024 * 1024, 8 * 1024 * 1024);
  return true;
}();
}  // namespace

void separable_filter(const Plane& src, std::span<const double> taps, Plane& dst) {
  const auto h = static_cast<std::ptrdiff_t>(src.height);
  const auto w = static_cast<std::ptrdiff_t>(src.width);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const bool big = src.size() * taps.size() * 2 > kParallelWork;

  Plane tmp(src.width, src.height);
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    const double* row = src.data.data() + y * w;
    double* out = tmp.data.data() + y * w;
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) acc += taps[t + radius] * row[reflect101(x + t, w)];
      out[x] = acc;
    }
  }

  dst = Plane(src.width, src.height);
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    double* out = dst.data.data() + y * w;
    for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
      const double tap = taps[t + radius];
      const double* row = tmp.data.data() + reflect101(y + t, h) * w;
      for (std::ptrdiff_t x = 0; x < w; ++x) out[x] += tap * row[x];
    }
  }
}

void im2col(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::span<double> col) {
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  assert(col.size() >= channels * k * k * oh * ow);
  double* dst = col.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in.data() + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        for (std::size_t y = 0; y < oh; ++y) {
          const double* src = plane + (y + ky) * w + kx;
          std::copy(src, src + ow, dst);
          dst += ow;
        }
      }
    }
  }
}

void col2im(std::span<const double> col, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::span<double> out) {
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  const double* src = col.data();
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = out.data() + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        for (std::size_t y = 0; y < oh; ++y) {
          double* dst = plane + (y + ky) * w + kx;
          for (std::size_t x = 0; x < ow; ++x) dst[x] += src[x];
          src += ow;
        }
      }
    }
  }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  auto C = as_matrix(c, m, n);
  if (accumulate)
    C.noalias() += as_matrix(a, m, k) * as_matrix(b, k, n);
  else
    C.noalias() = as_matrix(a, m, k) * as_matrix(b, k, n);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  auto C = as_matrix(c, k, n);
  if (accumulate)
    C.noalias() += as_matrix(a, m, k).transpose() * as_matrix(b, m, n);
  else
    C.noalias() = as_matrix(a, m, k).transpose() * as_matrix(b, m, n);
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock);
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
    }
  }
}

void conv2d_forward(std::span<const double> in, std::size_t in_c, std::size_t h, std::size_t w,
                    std::span<const double> weights, std::span<const double> bias, std::size_t out_c,
                    std::size_t k, std::span<double> col, std::span<double> out) {
  const std::size_t positions = (h - k + 1) * (w - k + 1);
  const std::size_t depth = in_c * k * k;
  im2col(in, in_c, h, w, k, col);
  for (std::size_t o = 0; o < out_c; ++o) std::fill_n(out.data() + o * positions, positions, bias[o]);
  gemm_nn(out_c, positions, depth, weights.data(), col.data(), out.data(), true);
}

void conv2d_backward(std::span<const double> d_out, std::span<const double> col, std::size_t in_c, std::size_t h,
                     std::size_t w, std::span<const double> weights, std::size_t out_c, std::size_t k,
                     std::span<double> d_weights, std::span<double> d_bias, std::span<double> d_in,
                     std::span<double> scratch) {
  const std::size_t positions = (h - k + 1) * (w - k + 1);
  const std::size_t depth = in_c * k * k;
  assert(scratch.size() >= depth * positions);

  for (std::size_t o = 0; o < out_c; ++o) {
    const double* g = d_out.data() + o * positions;
    double s = 0.0;
    for (std::size_t j = 0; j < positions; ++j) s += g[j];
    d_bias[o] += s;
  }

  // dW += dOut * col^T
  as_matrix(d_weights.data(), out_c, depth).noalias() +=
      as_matrix(d_out.data(), out_c, positions) * as_matrix(col.data(), depth, positions).transpose();

  if (!d_in.empty()) {
    // dcol = W^T * dOut, then fold back onto the input grid.
    gemm_tn(out_c, positions, depth, weights.data(), d_out.data(), scratch.data(), false);
    std::fill(d_in.begin(), d_in.end(), 0.0);
    col2im(scratch, in_c, h, w, k, d_in);
  }
}

void maxpool2x2(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w,
                std::span<double> out, std::span<std::uint32_t> argmax) {
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = c * h * w + 2 * y * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i)
          if (in[cand[i]] > in[best]) best = cand[i];
        const std::size_t o = c * oh * ow + y * ow + x;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2x2_backward(std::span<const double> d_out, std::span<const std::uint32_t> argmax,
                         std::span<double> d_in) {
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t o = 0; o < d_out.size(); ++o) d_in[argmax[o]] += d_out[o];
}

}  // namespace vth::kernels
