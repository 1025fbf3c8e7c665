#include <algorithm>

#include "vth/kernels.hpp"

namespace vth::kernels::reference {

void filter2d(const Plane& src, std::span<const double> window, std::size_t m, Plane& dst) {
  const auto h = static_cast<std::ptrdiff_t>(src.height);
  const auto w = static_cast<std::ptrdiff_t>(src.width);
  const auto r = static_cast<std::ptrdiff_t>(m / 2);
  dst = Plane(src.width, src.height);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const double wt = window[static_cast<std::size_t>((dy + r) * static_cast<std::ptrdiff_t>(m) + (dx + r))];
          acc += wt * src.at(static_cast<std::size_t>(reflect101(y + dy, h)),
                             static_cast<std::size_t>(reflect101(x + dx, w)));
        }
      }
      dst.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
}

void conv2d_forward(std::span<const double> in, std::size_t in_c, std::size_t h, std::size_t w,
                    std::span<const double> weights, std::span<const double> bias, std::size_t out_c,
                    std::size_t k, std::span<double> out) {
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  for (std::size_t o = 0; o < out_c; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = bias[o];
        for (std::size_t c = 0; c < in_c; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              acc += weights[((o * in_c + c) * k + ky) * k + kx] * in[(c * h + y + ky) * w + x + kx];
        out[(o * oh + y) * ow + x] = acc;
      }
    }
  }
}

void conv2d_backward(std::span<const double> d_out, std::span<const double> in, std::size_t in_c, std::size_t h,
                     std::size_t w, std::span<const double> weights, std::size_t out_c, std::size_t k,
                     std::span<double> d_weights, std::span<double> d_bias, std::span<double> d_in) {
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  if (!d_in.empty()) std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t o = 0; o < out_c; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double g = d_out[(o * oh + y) * ow + x];
        d_bias[o] += g;
        for (std::size_t c = 0; c < in_c; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t wi = ((o * in_c + c) * k + ky) * k + kx;
              const std::size_t ii = (c * h + y + ky) * w + x + kx;
              d_weights[wi] += g * in[ii];
              if (!d_in.empty()) d_in[ii] += g * weights[wi];
            }
          }
        }
      }
    }
  }
}

void maxpool2x2(std::span<const double> in, std::size_t channels, std::size_t h, std::size_t w,
                std::span<double> out, std::span<std::uint32_t> argmax) {
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = (c * h + 2 * y + dy) * w + 2 * x + dx;
            if (in[i] > best || (dy == 0 && dx == 0)) {
              best = in[i];
              arg = i;
            }
          }
        }
        out[(c * oh + y) * ow + x] = best;
        argmax[(c * oh + y) * ow + x] = static_cast<std::uint32_t>(arg);
      }
    }
  }
}

}  // namespace vth::kernels::reference
