#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "vth/image.hpp"
#include "vth/pnet.hpp"

namespace vth {

// Grid of thresholds; cell (r, c) holds T for the patch anchored at pixel
// (r * stride, c * stride).
struct ThresholdMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 1;
  std::size_t patch_size = arch::kPatch;
  std::size_t source_width = 0;
  std::size_t source_height = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

// Eval-mode P-net over every stride-grid patch. Patches run in parallel.
// Throws DataError for images smaller than 32x32.
ThresholdMap predict_map(const GrayImage& img, const PNetParams& params, std::size_t stride);

// Bin edges round(i * n / target), i = 0..target.
std::vector<std::size_t> bin_edges(std::size_t n, std::size_t target);

// Block-averages the map onto a coarser target grid.
ThresholdMap decimate_map(const ThresholdMap& map, std::size_t target_rows, std::size_t target_cols);

// Min-max scaling to [0, 1] (lowest threshold black); a constant map renders
// as 0.5. The image is cols wide and rows high.
GrayImage normalize_map(const ThresholdMap& map);

// Writes <prefix>.csv (one grid row per line, shortest round-trip decimals)
// and <prefix>.json (grid dims, stride, patch size, source dims, hash).
void export_map(const ThresholdMap& map, const std::filesystem::path& prefix, const std::string& checkpoint_hash);

// Reads back a map written by export_map. Throws DataError on malformed files.
ThresholdMap import_map(const std::filesystem::path& prefix);

// <prefix> + extension, keeping any dots already in the prefix.
std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& ext);

}  // namespace vth
