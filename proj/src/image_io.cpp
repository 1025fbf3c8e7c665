#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "vth/error.hpp"
#include "vth/image.hpp"

namespace vth {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> data) {
  if (width == 0 || height == 0) throw std::invalid_argument("GrayImage: zero dimension");
  if (data.size() != width * height)
    throw std::invalid_argument("GrayImage: data length " + std::to_string(data.size()) + " != " +
                                std::to_string(width) + "x" + std::to_string(height));
  for (double v : data) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("GrayImage: value outside [0, 1]");
  }
  plane_.width = width;
  plane_.height = height;
  plane_.data = std::move(data);
}

GrayImage GrayImage::constant(std::size_t width, std::size_t height, double value) {
  return GrayImage(width, height, std::vector<double>(width * height, value));
}

GrayImage GrayImage::crop(std::size_t row, std::size_t col, std::size_t w, std::size_t h) const {
  if (row + h > height() || col + w > width()) throw std::out_of_range("GrayImage::crop: rectangle outside image");
  std::vector<double> out;
  out.reserve(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    const auto first = plane_.data.begin() + static_cast<std::ptrdiff_t>((row + r) * width() + col);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(w));
  }
  return GrayImage(w, h, std::move(out));
}

unsigned char quantize_u8(double v) {
  const double scaled = std::floor(v * 255.0 + 0.5);
  return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') {
    token += bytes[pos++];
  }
  if (token.empty()) throw DataError(path.string() + ": malformed PGM header (unexpected end of file)");
  return token;
}

std::size_t header_number(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path,
                          const char* what) {
  const std::string token = header_token(bytes, pos, path);
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw DataError(path.string() + ": malformed PGM header (" + what + " '" + token + "')");
  }
  if (token.size() > 9) throw DataError(path.string() + ": PGM " + what + " too large");
  return std::stoul(token);
}

}  // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError(path.string() + ": not a PGM file");
  if (bytes[1] != '5')
    throw DataError(path.string() + ": unsupported format P" + std::string(1, bytes[1]) + " (only binary P5)");
  std::size_t pos = 2;
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError(path.string() + ": malformed PGM header");

  const std::size_t width = header_number(bytes, pos, path, "width");
  const std::size_t height = header_number(bytes, pos, path, "height");
  const std::size_t maxval = header_number(bytes, pos, path, "maxval");
  if (width == 0 || height == 0) throw DataError(path.string() + ": zero image dimension");
  if (maxval != 255) throw DataError(path.string() + ": maxval " + std::to_string(maxval) + " (only 255 supported)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError(path.string() + ": malformed PGM header");
  ++pos;  // exactly one whitespace byte separates maxval from the raster

  const std::size_t count = width * height;
  if (bytes.size() - pos < count)
    throw DataError(path.string() + ": truncated raster (" + std::to_string(bytes.size() - pos) + " of " +
                    std::to_string(count) + " bytes)");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return GrayImage(width, height, std::move(data));
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.values().size());
  for (double v : img.values()) out.push_back(static_cast<char>(quantize_u8(v)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write image " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed for " + path.string());
}

}  // namespace vth
