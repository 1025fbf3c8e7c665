#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "vth/image.hpp"
#include "vth/inference.hpp"

namespace vth {

// Predicted thresholds (model scale) against measured thresholds (dB RMS
// contrast). luminance is the mean patch luminance on the 0..255 scale, one
// per pair, or empty when unknown.
struct PairedData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> luminance;
};

enum class Direction { increasing, decreasing };

struct MonotoneCubic {
  std::array<double, 4> coeffs{};  // c0 + c1 x + c2 x^2 + c3 x^3
  Direction direction = Direction::increasing;
  double residual_rmse = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool repaired = false;  // a residual slope violation was removed by shifting c1

  double operator()(double x) const { return coeffs[0] + x * (coeffs[1] + x * (coeffs[2] + x * coeffs[3])); }
  double derivative(double x) const { return coeffs[1] + x * (2.0 * coeffs[2] + 3.0 * x * coeffs[3]); }
};

struct MonotoneFitOptions {
  double penalty = 1e3;
  std::size_t grid_points = 256;
  std::size_t max_iterations = 100000;
  double relative_tolerance = 1e-12;
};

// Least-squares cubic with a quadratic penalty on slope violations over a
// dense grid spanning [min x, max x]. Solved by backtracking gradient descent
// on standardized x, starting from the unconstrained normal-equation fit.
// Throws DataError for fewer than 4 points or constant x.
MonotoneCubic fit_monotonic_cubic(std::span<const double> x, std::span<const double> y,
                                  const MonotoneFitOptions& options = {});

// Closed-form unconstrained least-squares cubic (normal equations on
// standardized x, mapped back). Exposed for the linear-baseline comparison.
std::array<double, 4> least_squares_cubic(std::span<const double> x, std::span<const double> y);

// Pearson correlation. Throws DataError on length mismatch, fewer than two
// points, or a constant input.
double plcc(std::span<const double> x, std::span<const double> y);

double rmse(std::span<const double> pred, std::span<const double> gt);

struct LuminanceBand {
  double lo = 10.0;
  double hi = 250.0;
};

struct EvalResult {
  double plcc_raw = 0.0;
  double plcc_fitted = 0.0;
  double rmse_fitted = 0.0;
  std::size_t n_total = 0;
  std::size_t n_kept = 0;
  std::vector<std::size_t> excluded;
  std::optional<LuminanceBand> band;
  MonotoneCubic fit;

  nlohmann::json to_json() const;
};

// Statistics on all pairs, or on those whose luminance lies in the band.
// Throws DataError when fewer than 4 pairs remain or a band is requested
// without luminance data.
EvalResult evaluate(const PairedData& data, std::optional<LuminanceBand> band = std::nullopt);

// 256-bin histogram of mean patch luminance (x255, rounded half up) over the
// training patch grid of every image.
std::array<std::size_t, 256> intensity_histogram(std::span<const GrayImage> images, std::size_t patch_size,
                                                 std::size_t stride);

// Measured thresholds on a grid, from a CSV with header
// `row,col,threshold_db` and an optional fourth `luminance` column (0..255).
struct GroundTruthGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> threshold_db;  // row-major
  std::vector<double> luminance;     // row-major, or empty
};

// Throws DataError on duplicate cells and on cells missing from the grid
// spanned by the largest row and column indices.
GroundTruthGrid load_groundtruth(const std::filesystem::path& path);

// Pairs cell by cell. Throws DataError listing missing cells when the grids
// differ.
PairedData pair_with_map(const GroundTruthGrid& gt, const ThresholdMap& map);

// Mean luminance (0..255) of each cell footprint when the image is split
// into rows x cols bins with the decimation edge rule.
std::vector<double> footprint_luminance(const GrayImage& img, std::size_t rows, std::size_t cols);

}  // namespace vth
