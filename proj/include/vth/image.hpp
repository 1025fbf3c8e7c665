#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace vth {

// Row-major plane of doubles with no range constraint. Backs feature maps
// and anything else that is image-shaped but not a luminance image.
struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h, fill) {}

  double& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  double at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  std::size_t size() const { return data.size(); }
};

// Single-channel luminance raster with values in [0, 1].
class GrayImage {
 public:
  // Throws std::invalid_argument on zero dimensions, a size mismatch, or a
  // value outside [0, 1] (NaN included).
  GrayImage(std::size_t width, std::size_t height, std::vector<double> data);

  static GrayImage constant(std::size_t width, std::size_t height, double value);

  std::size_t width() const { return plane_.width; }
  std::size_t height() const { return plane_.height; }
  double at(std::size_t row, std::size_t col) const { return plane_.at(row, col); }
  std::span<const double> values() const { return plane_.data; }
  const Plane& plane() const { return plane_; }

  // Copy of the rectangle [row, row + h) x [col, col + w).
  GrayImage crop(std::size_t row, std::size_t col, std::size_t w, std::size_t h) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  Plane plane_;
};

inline bool operator==(const Plane& a, const Plane& b) {
  return a.width == b.width && a.height == b.height && a.data == b.data;
}

// Binary PGM (P5, maxval 255). Samples are scaled by 1/255 on load.
// Throws DataError on any malformed, truncated or unsupported file.
GrayImage load_pgm(const std::filesystem::path& path);

// Writes P5 with maxval 255; each value is quantized to floor(v * 255 + 0.5).
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// The 8-bit code save_pgm writes for a luminance value.
unsigned char quantize_u8(double v);

}  // namespace vth
