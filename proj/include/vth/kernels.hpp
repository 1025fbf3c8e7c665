#pragma once

// Dense numeric kernels behind the feature extractor and the P-net.
//
// The top-level namespace holds the production kernels: im2col + GEMM
// convolution (GEMM via Eigen, single-threaded) and separable filtering,
// OpenMP-parallel over rows when the image is large enough. vth::kernels::reference holds direct
// nested-loop versions that are kept serial and simple; the test suite checks
// the two against each other and bench/ compares their speed.
//
// Tensors are flat, channel-major (c, y, x) arrays.

#include <cstddef>
#include <cstdint>
#include <span>

#include "vth/image.hpp"

namespace vth::kernels {

// Mirror index for reflect-101 padding: -1 -> 1, n -> n - 2.
constexpr std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Separable correlation with a symmetric 1-D kernel along rows then columns,
// reflect-101 borders. dst is resized to src's shape.
void separable_filter(const Plane& src, std::span<const double> taps, Plane& dst);

// Unrolls k x k valid windows of a (channels, h, w) tensor into a
// (channels*k*k) x (oh*ow) matrix, oh = h - k + 1.
void im2col(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::span<double> col);

// Adjoint of im2col: scatters-adds a column matrix back onto a zeroed tensor.
void col2im(std::span<const double> col, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::span<double> out);

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

// C[k x n] (+)= A[m x k]^T * B[m x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

// out[r x c] = in[c x r]^T
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);

// Valid convolution (cross-correlation) with bias, via im2col + GEMM.
// weights: (out_c, in_c, k, k). col receives the im2col matrix for reuse in
// the backward pass and must hold in_c*k*k*oh*ow values.
void conv2d_forward(std::span<const double> in, std::size_t in_c, std::size_t h, std::size_t w,
                    std::span<const double> weights, std::span<const double> bias, std::size_t out_c,
                    std::size_t k, std::span<double> col, std::span<double> out);

// Gradients of a valid convolution from the output gradient and the cached
// im2col matrix. d_in may be empty when the input gradient is not needed.
// scratch must hold in_c*k*k*oh*ow values.
void conv2d_backward(std::span<const double> d_out, std::span<const double> col, std::size_t in_c, std::size_t h,
                     std::size_t w, std::span<const double> weights, std::size_t out_c, std::size_t k,
                     std::span<double> d_weights, std::span<double> d_bias, std::span<double> d_in,
                     std::span<double> scratch);

// 2x2 max pooling with stride 2. argmax records the flat input index of the
// winner; ties go to the first element in row-major window order.
void maxpool2x2(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w,
                std::span<double> out, std::span<std::uint32_t> argmax);

void maxpool2x2_backward(std::span<const double> d_out, std::span<const std::uint32_t> argmax,
                         std::span<double> d_in);

namespace reference {

// Direct 2-D correlation with an M x M window and reflect-101 borders.
void filter2d(const Plane& src, std::span<const double> window, std::size_t m, Plane& dst);

void conv2d_forward(std::span<const double> in, std::size_t in_c, std::size_t h, std::size_t w,
                    std::span<const double> weights, std::span<const double> bias, std::size_t out_c,
                    std::size_t k, std::span<double> out);

void conv2d_backward(std::span<const double> d_out, std::span<const double> in, std::size_t in_c, std::size_t h,
                     std::size_t w, std::span<const double> weights, std::size_t out_c, std::size_t k,
                     std::span<double> d_weights, std::span<double> d_bias, std::span<double> d_in);

void maxpool2x2(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w,
                std::span<double> out, std::span<std::uint32_t> argmax);

}  // namespace reference

}  // namespace vth::kernels
