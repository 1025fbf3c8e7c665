#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "vth/error.hpp"
#include "vth/evaluation.hpp"
#include "vth/trainer.hpp"

namespace vth {

namespace {

struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;
};

Standardizer standardize(std::span<const double> x) {
  Standardizer s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.scale = std::sqrt(ss / static_cast<double>(x.size()));
  return s;
}

// Gaussian elimination with partial pivoting on a 4x4 system.
std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (a[col][col] == 0.0) throw DataError("monotone fit: singular normal equations (too few distinct x values)");
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 4> x{};
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 4; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

std::array<double, 4> normal_equations(std::span<const double> t, std::span<const double> y) {
  std::array<std::array<double, 4>, 4> a{};
  std::array<double, 4> b{};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double phi[4] = {1.0, t[i], t[i] * t[i], t[i] * t[i] * t[i]};
    for (int r = 0; r < 4; ++r) {
      b[r] += phi[r] * y[i];
      for (int c = 0; c < 4; ++c) a[r][c] += phi[r] * phi[c];
    }
  }
  return solve4(a, b);
}

double poly(const std::array<double, 4>& b, double t) { return b[0] + t * (b[1] + t * (b[2] + t * b[3])); }
double slope(const std::array<double, 4>& b, double t) { return b[1] + t * (2.0 * b[2] + 3.0 * t * b[3]); }

// Coefficients of p((x - mean) / scale) in powers of x.
std::array<double, 4> unstandardize(const std::array<double, 4>& b, const Standardizer& s) {
  const double a = 1.0 / s.scale;
  const double c = -s.mean / s.scale;
  static constexpr double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  std::array<double, 4> out{};
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j <= k; ++j) out[j] += b[k] * binom[k][j] * std::pow(a, j) * std::pow(c, k - j);
  return out;
}

void check_fit_input(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("monotone fit: x and y differ in length");
  if (x.size() < 4) throw DataError("monotone fit: need at least 4 points, got " + std::to_string(x.size()));
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo)) throw DataError("monotone fit: x is constant");
}

double correlation_or_zero(std::span<const double> x, std::span<const double> y) {
  try {
    return plcc(x, y);
  } catch (const DataError&) {
    return 0.0;
  }
}

}  // namespace

std::array<double, 4> least_squares_cubic(std::span<const double> x, std::span<const double> y) {
  check_fit_input(x, y);
  const Standardizer s = standardize(x);
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = (x[i] - s.mean) / s.scale;
  return unstandardize(normal_equations(t, y), s);
}

MonotoneCubic fit_monotonic_cubic(std::span<const double> x, std::span<const double> y,
                                  const MonotoneFitOptions& options) {
  check_fit_input(x, y);
  const std::size_t n = x.size();
  const Standardizer st = standardize(x);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (x[i] - st.mean) / st.scale;

  MonotoneCubic fit;
  fit.direction = correlation_or_zero(x, y) >= 0.0 ? Direction::increasing : Direction::decreasing;
  const double s = fit.direction == Direction::increasing ? 1.0 : -1.0;

  const auto [tmin, tmax] = std::minmax_element(t.begin(), t.end());
  const std::size_t m = std::max<std::size_t>(options.grid_points, 2);
  std::vector<double> grid(m);
  for (std::size_t k = 0; k < m; ++k)
    grid[k] = *tmin + (*tmax - *tmin) * static_cast<double>(k) / static_cast<double>(m - 1);

  const double lambda = options.penalty;
  auto objective = [&](const std::array<double, 4>& b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = poly(b, t[i]) - y[i];
      f += r * r;
    }
    for (double g : grid) {
      const double v = std::max(0.0, -s * slope(b, g));
      f += lambda * v * v;
    }
    return f;
  };
  auto gradient = [&](const std::array<double, 4>& b) {
    std::array<double, 4> grad{};
    for (std::size_t i = 0; i < n; ++i) {
      const double r = 2.0 * (poly(b, t[i]) - y[i]);
      grad[0] += r;
      grad[1] += r * t[i];
      grad[2] += r * t[i] * t[i];
      grad[3] += r * t[i] * t[i] * t[i];
    }
    for (double g : grid) {
      const double d = slope(b, g);
      if (-s * d > 0.0) {
        const double w = 2.0 * lambda * d;
        grad[1] += w;
        grad[2] += w * 2.0 * g;
        grad[3] += w * 3.0 * g * g;
      }
    }
    return grad;
  };

  std::array<double, 4> b = normal_equations(t, y);
  double f = objective(b);
  double step = 1.0;
  while (fit.iterations < options.max_iterations) {
    const auto g = gradient(b);
    const double g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3];
    if (g2 == 0.0) {
      fit.converged = true;
      break;
    }
    std::array<double, 4> trial{};
    double f_trial = f;
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      for (int k = 0; k < 4; ++k) trial[k] = b[k] - step * g[k];
      f_trial = objective(trial);
      if (f_trial <= f - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++fit.iterations;
    if (!accepted || f_trial >= f) {
      fit.converged = true;
      break;
    }
    const double decrease = f - f_trial;
    b = trial;
    const double previous = f;
    f = f_trial;
    if (decrease < options.relative_tolerance * previous) {
      fit.converged = true;
      break;
    }
    step *= 2.0;
  }

  // The penalty is soft; remove any leftover violation by a constant slope
  // shift so the returned polynomial is monotone on the hull.
  double worst = 0.0;
  for (double g : grid) worst = std::max(worst, -s * slope(b, g));
  if (worst > 0.0) {
    b[1] += s * worst;
    fit.repaired = true;
  }

  fit.objective = objective(b);
  fit.coeffs = unstandardize(b, st);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = fit(x[i]) - y[i];
    ss += r * r;
  }
  fit.residual_rmse = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

double plcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("plcc: length mismatch");
  if (x.size() < 2) throw DataError("plcc: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("plcc: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double rmse(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw DataError("rmse: length mismatch");
  if (pred.empty()) throw DataError("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

nlohmann::json EvalResult::to_json() const {
  nlohmann::json j = {
      {"plcc_raw", plcc_raw},
      {"plcc_fitted", plcc_fitted},
      {"rmse_fitted", rmse_fitted},
      {"n_total", n_total},
      {"n_kept", n_kept},
      {"excluded", excluded},
      {"fit",
       {{"coefficients", fit.coeffs},
        {"direction", fit.direction == Direction::increasing ? "increasing" : "decreasing"},
        {"residual_rmse", fit.residual_rmse},
        {"iterations", fit.iterations},
        {"converged", fit.converged},
        {"repaired", fit.repaired}}},
  };
  j["band"] = band ? nlohmann::json::array({band->lo, band->hi}) : nlohmann::json(nullptr);
  return j;
}

EvalResult evaluate(const PairedData& data, std::optional<LuminanceBand> band) {
  if (data.x.size() != data.y.size()) throw DataError("evaluate: x and y differ in length");
  EvalResult res;
  res.n_total = data.x.size();
  res.band = band;

  std::vector<double> x, y;
  if (band) {
    if (data.luminance.size() != data.x.size())
      throw DataError("evaluate: a luminance band needs one luminance value per pair");
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double l = data.luminance[i];
      if (l >= band->lo && l <= band->hi) {
        x.push_back(data.x[i]);
        y.push_back(data.y[i]);
      } else {
        res.excluded.push_back(i);
      }
    }
  } else {
    x = data.x;
    y = data.y;
  }
  res.n_kept = x.size();
  if (res.n_kept < 4) throw DataError("evaluate: only " + std::to_string(res.n_kept) + " pairs kept (need 4)");

  res.plcc_raw = plcc(x, y);
  res.fit = fit_monotonic_cubic(x, y);
  std::vector<double> pred(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) pred[i] = res.fit(x[i]);
  res.plcc_fitted = correlation_or_zero(pred, y);
  res.rmse_fitted = rmse(pred, y);
  return res;
}

std::array<std::size_t, 256> intensity_histogram(std::span<const GrayImage> images, std::size_t patch_size,
                                                 std::size_t stride) {
  if (patch_size == 0 || stride == 0) throw std::invalid_argument("intensity_histogram: zero patch size or stride");
  std::array<std::size_t, 256> bins{};
  for (const auto& img : images) {
    if (img.width() < patch_size || img.height() < patch_size)
      throw DataError("intensity_histogram: image " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + " smaller than the patch");
    for (std::size_t r : patch_grid(img.height(), patch_size, stride)) {
      for (std::size_t c : patch_grid(img.width(), patch_size, stride)) {
        double sum = 0.0;
        for (std::size_t y = 0; y < patch_size; ++y)
          for (std::size_t x = 0; x < patch_size; ++x) sum += img.at(r + y, c + x);
        const double mean = sum / static_cast<double>(patch_size * patch_size);
        const auto bin = static_cast<std::size_t>(std::clamp(std::floor(mean * 255.0 + 0.5), 0.0, 255.0));
        ++bins[bin];
      }
    }
  }
  return bins;
}

GroundTruthGrid load_groundtruth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth " + path.string());

  struct Cell {
    double db;
    double lum;
  };
  std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
  bool have_header = false;
  bool with_luminance = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!have_header) {
      if (line == "row,col,threshold_db") {
        with_luminance = false;
      } else if (line == "row,col,threshold_db,luminance") {
        with_luminance = true;
      } else {
        throw DataError(where + ": expected header 'row,col,threshold_db[,luminance]'");
      }
      have_header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != (with_luminance ? 4u : 3u)) throw DataError(where + ": wrong number of columns");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(where + ": cannot parse '" + s + "'");
      return v;
    };
    auto index = [&](const std::string& s) {
      const double v = num(s);
      if (v < 0.0 || v != std::floor(v)) throw DataError(where + ": bad cell index '" + s + "'");
      return static_cast<std::size_t>(v);
    };
    const auto key = std::make_pair(index(f[0]), index(f[1]));
    if (cells.count(key))
      throw DataError(where + ": duplicate cell (" + f[0] + ", " + f[1] + ")");
    cells[key] = {num(f[2]), with_luminance ? num(f[3]) : 0.0};
  }
  if (!have_header) throw DataError(path.string() + ": missing header");
  if (cells.empty()) throw DataError(path.string() + ": no cells");

  GroundTruthGrid gt;
  for (const auto& [k, v] : cells) {
    gt.rows = std::max(gt.rows, k.first + 1);
    gt.cols = std::max(gt.cols, k.second + 1);
  }
  std::string missing;
  std::size_t n_missing = 0;
  gt.threshold_db.assign(gt.rows * gt.cols, 0.0);
  if (with_luminance) gt.luminance.assign(gt.rows * gt.cols, 0.0);
  for (std::size_t r = 0; r < gt.rows; ++r) {
    for (std::size_t c = 0; c < gt.cols; ++c) {
      const auto it = cells.find({r, c});
      if (it == cells.end()) {
        if (++n_missing <= 20) missing += " (" + std::to_string(r) + "," + std::to_string(c) + ")";
        continue;
      }
      gt.threshold_db[r * gt.cols + c] = it->second.db;
      if (with_luminance) gt.luminance[r * gt.cols + c] = it->second.lum;
    }
  }
  if (n_missing)
    throw DataError(path.string() + ": " + std::to_string(n_missing) + " missing cells in the " +
                    std::to_string(gt.rows) + "x" + std::to_string(gt.cols) + " grid:" + missing);
  return gt;
}

PairedData pair_with_map(const GroundTruthGrid& gt, const ThresholdMap& map) {
  if (gt.rows != map.rows || gt.cols != map.cols) {
    std::string missing;
    std::size_t n_missing = 0;
    const std::size_t rows = std::max(gt.rows, map.rows);
    const std::size_t cols = std::max(gt.cols, map.cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const bool in_gt = r < gt.rows && c < gt.cols;
        const bool in_map = r < map.rows && c < map.cols;
        if (in_gt != in_map && ++n_missing <= 20)
          missing += " (" + std::to_string(r) + "," + std::to_string(c) + (in_gt ? ": no prediction)" : ": no ground truth)");
      }
    }
    throw DataError("ground truth grid " + std::to_string(gt.rows) + "x" + std::to_string(gt.cols) +
                    " does not match map " + std::to_string(map.rows) + "x" + std::to_string(map.cols) + "; " +
                    std::to_string(n_missing) + " missing cells:" + missing);
  }
  PairedData d;
  d.x = map.values;
  d.y = gt.threshold_db;
  d.luminance = gt.luminance;
  return d;
}

std::vector<double> footprint_luminance(const GrayImage& img, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || rows > img.height() || cols > img.width())
    throw DataError("footprint_luminance: grid larger than the image");
  const auto re = bin_edges(img.height(), rows);
  const auto ce = bin_edges(img.width(), cols);
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (std::size_t y = re[r]; y < re[r + 1]; ++y)
        for (std::size_t x = ce[c]; x < ce[c + 1]; ++x) sum += img.at(y, x);
      out[r * cols + c] = 255.0 * sum / static_cast<double>((re[r + 1] - re[r]) * (ce[c + 1] - ce[c]));
    }
  }
  return out;
}

}  // namespace vth
