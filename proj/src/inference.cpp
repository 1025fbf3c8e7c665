#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vth/error.hpp"
#include "vth/features.hpp"
#include "vth/inference.hpp"

namespace vth {

ThresholdMap predict_map(const GrayImage& img, const PNetParams& params, std::size_t stride) {
  constexpr std::size_t n = arch::kPatch;
  if (stride == 0) throw std::invalid_argument("predict_map: stride must be >= 1");
  if (img.width() < n || img.height() < n)
    throw DataError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                    " is smaller than a 32x32 patch");

  ThresholdMap map;
  map.rows = (img.height() - n) / stride + 1;
  map.cols = (img.width() - n) / stride + 1;
  map.stride = stride;
  map.patch_size = n;
  map.source_width = img.width();
  map.source_height = img.height();
  map.values.resize(map.rows * map.cols);

  const FeatureMaps maps = default_features(img);
  const auto cells = static_cast<std::ptrdiff_t>(map.values.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < cells; ++i) {
    const std::size_t r = static_cast<std::size_t>(i) / map.cols;
    const std::size_t c = static_cast<std::size_t>(i) % map.cols;
    map.values[static_cast<std::size_t>(i)] =
        predict_threshold(augment_patch(maps, img, {r * stride, c * stride}, n), params);
  }
  return map;
}

std::vector<std::size_t> bin_edges(std::size_t n, std::size_t target) {
  std::vector<std::size_t> edges(target + 1);
  for (std::size_t i = 0; i <= target; ++i)
    edges[i] = static_cast<std::size_t>(std::lround(static_cast<double>(i) * static_cast<double>(n) /
                                                    static_cast<double>(target)));
  return edges;
}

ThresholdMap decimate_map(const ThresholdMap& map, std::size_t target_rows, std::size_t target_cols) {
  if (target_rows == 0 || target_cols == 0 || target_rows > map.rows || target_cols > map.cols)
    throw std::invalid_argument("decimate_map: target grid must be non-empty and no larger than the source");
  const auto re = bin_edges(map.rows, target_rows);
  const auto ce = bin_edges(map.cols, target_cols);

  ThresholdMap out = map;
  out.rows = target_rows;
  out.cols = target_cols;
  out.values.assign(target_rows * target_cols, 0.0);
  for (std::size_t r = 0; r < target_rows; ++r) {
    for (std::size_t c = 0; c < target_cols; ++c) {
      if (re[r + 1] <= re[r] || ce[c + 1] <= ce[c]) throw std::logic_error("decimate_map: empty bin");
      double sum = 0.0;
      for (std::size_t y = re[r]; y < re[r + 1]; ++y)
        for (std::size_t x = ce[c]; x < ce[c + 1]; ++x) sum += map.at(y, x);
      out.at(r, c) = sum / static_cast<double>((re[r + 1] - re[r]) * (ce[c + 1] - ce[c]));
    }
  }
  return out;
}

GrayImage normalize_map(const ThresholdMap& map) {
  if (map.values.empty()) throw std::invalid_argument("normalize_map: empty map");
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  std::vector<double> v(map.values.size(), 0.5);
  if (*hi > *lo) {
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp((map.values[i] - *lo) / range, 0.0, 1.0);
  }
  return GrayImage(map.cols, map.rows, std::move(v));
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& ext) {
  std::filesystem::path p = prefix;
  p += ext;
  return p;
}

void export_map(const ThresholdMap& map, const std::filesystem::path& prefix, const std::string& checkpoint_hash) {
  const auto csv_path = with_suffix(prefix, ".csv");
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw DataError("cannot write " + csv_path.string());
  char buf[64];
  for (std::size_t r = 0; r < map.rows; ++r) {
    for (std::size_t c = 0; c < map.cols; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, map.at(r, c));
      if (c) csv << ',';
      csv.write(buf, res.ptr - buf);
    }
    csv << '\n';
  }
  if (!csv) throw DataError("write failed for " + csv_path.string());

  const nlohmann::json meta = {{"rows", map.rows},
                               {"cols", map.cols},
                               {"stride", map.stride},
                               {"patch_size", map.patch_size},
                               {"source_width", map.source_width},
                               {"source_height", map.source_height},
                               {"checkpoint_hash", checkpoint_hash}};
  const auto json_path = with_suffix(prefix, ".json");
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw DataError("cannot write " + json_path.string());
  js << meta.dump(2) << '\n';
  if (!js) throw DataError("write failed for " + json_path.string());
}

ThresholdMap import_map(const std::filesystem::path& prefix) {
  const auto json_path = with_suffix(prefix, ".json");
  const auto csv_path = with_suffix(prefix, ".csv");
  std::ifstream js(json_path);
  if (!js) throw DataError("cannot open map sidecar " + json_path.string());
  ThresholdMap map;
  try {
    const auto meta = nlohmann::json::parse(js);
    map.rows = meta.at("rows").get<std::size_t>();
    map.cols = meta.at("cols").get<std::size_t>();
    map.stride = meta.at("stride").get<std::size_t>();
    map.patch_size = meta.at("patch_size").get<std::size_t>();
    map.source_width = meta.at("source_width").get<std::size_t>();
    map.source_height = meta.at("source_height").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }

  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot open map " + csv_path.string());
  std::string line;
  std::size_t r = 0;
  while (std::getline(csv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw DataError(csv_path.string() + ": bad value '" + cell + "' in row " + std::to_string(r));
      map.values.push_back(v);
      ++c;
    }
    if (c != map.cols) throw DataError(csv_path.string() + ": row " + std::to_string(r) + " has wrong width");
    ++r;
  }
  if (r != map.rows) throw DataError(csv_path.string() + ": row count disagrees with sidecar");
  return map;
}

}  // namespace vth
