#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vth/error.hpp"
#include "vth/manifest.hpp"
#include "vth/mixing.hpp"
#include "vth/rng.hpp"
#include "vth/synth.hpp"
#include "vth/trainer.hpp"

namespace vth {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTextureStream = 0x74657874;  // "text"
constexpr std::uint64_t kDistortStream = 0x64697374;  // "dist"
constexpr std::size_t kPatch = 32;

GrayImage quantized(std::vector<double> v, std::size_t w, std::size_t h) {
  for (double& x : v) x = quantize_u8(std::clamp(x, 0.0, 1.0)) / 255.0;
  return GrayImage(w, h, std::move(v));
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string numbered(const char* fmt, std::size_t a, std::size_t b = 0, std::size_t c = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

struct PatchRecord {
  ManifestRecord manifest;
  OracleEntry oracle;
};

}  // namespace

void SynthConfig::validate() const {
  if (n_images == 0) throw std::invalid_argument("synth: n_images must be positive");
  if (image_size < kPatch) throw std::invalid_argument("synth: image size must be at least 32");
  if (noise_amplitudes.empty()) throw std::invalid_argument("synth: no noise amplitudes");
  for (double a : noise_amplitudes)
    if (!(a > 0.0)) throw std::invalid_argument("synth: noise amplitudes must be positive");
  if (!(t0 > 0.0) || !(t1 >= 0.0)) throw std::invalid_argument("synth: need t0 > 0 and t1 >= 0");
  if (!(alpha_true > 0.0)) throw std::invalid_argument("synth: alpha_true must be positive");
  if (patch_stride == 0) throw std::invalid_argument("synth: patch stride must be positive");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_images", n_images}, {"image_size", image_size}, {"noise_amplitudes", noise_amplitudes},
          {"alpha_true", alpha_true}, {"t0", t0}, {"t1", t1}, {"seed", seed}, {"patch_stride", patch_stride},
          {"generator", "xoshiro256** seeded by splitmix64"}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_images = j.at("n_images").get<std::size_t>();
  c.image_size = j.at("image_size").get<std::size_t>();
  c.noise_amplitudes = j.at("noise_amplitudes").get<std::vector<double>>();
  c.alpha_true = j.at("alpha_true").get<double>();
  c.t0 = j.at("t0").get<double>();
  c.t1 = j.at("t1").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.patch_stride = j.at("patch_stride").get<std::size_t>();
  return c;
}

double masking_threshold(std::span<const double> patch, double t0, double t1) {
  if (patch.empty()) return t0;
  // Shifted two-pass: a constant patch gives exactly zero spread.
  const double k = patch.front();
  double mean = 0.0;
  for (double v : patch) mean += v - k;
  mean /= static_cast<double>(patch.size());
  double ss = 0.0;
  for (double v : patch) ss += (v - k - mean) * (v - k - mean);
  return t0 + t1 * std::sqrt(ss / static_cast<double>(patch.size()));
}

GrayImage procedural_texture(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    double fx, fy, phase, amp;
  };
  // Each texture draws its waves from a two-octave band whose centre is
  // log-uniform between 1/4 and 8 cycles per image, so some textures are
  // smooth at patch scale and others busy.
  const double centre = 0.25 * std::pow(32.0, rng.uniform());
  Wave waves[8];
  for (auto& w : waves) {
    const double cycles = centre * std::pow(2.0, rng.uniform(-1.0, 1.0));
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform();
    w = {cycles * std::cos(theta), cycles * std::sin(theta), rng.uniform(0.0, 2.0 * std::numbers::pi), amp * amp};
  }
  const double noise_level = rng.uniform(0.0, 0.3);
  // Contrast gain uniform in [1/16, 1]: the texture is centred on 0.5 and
  // scaled so its extreme touches [0.1, 0.9] only at full gain. Uniform
  // rather than log-uniform keeps T* spread out instead of bunched near t0.
  const double gain = rng.uniform(1.0 / 16.0, 1.0);

  const double n = static_cast<double>(size);
  std::vector<double> v(size * size);
  double peak = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double s = 0.0;
      for (const auto& w : waves)
        s += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * static_cast<double>(x) + w.fy * static_cast<double>(y)) / n + w.phase);
      v[y * size + x] = s;
      peak = std::max(peak, std::abs(s));
    }
  }
  for (double& s : v) s += noise_level * peak * rng.uniform(-1.0, 1.0);

  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double extent = 0.0;
  for (double s : v) extent = std::max(extent, std::abs(s - mean));
  for (double& s : v) s = extent > 0.0 ? 0.5 + 0.4 * gain * (s - mean) / extent : 0.5;
  return quantized(std::move(v), size, size);
}

fs::path generate(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  try {
    fs::create_directories(out_dir / "ref");
    fs::create_directories(out_dir / "dist");
    fs::create_directories(out_dir / "patches");
  } catch (const fs::filesystem_error& e) {
    throw DataError(std::string("cannot create output tree: ") + e.what());
  }

  const auto origins = patch_grid(cfg.image_size, kPatch, cfg.patch_stride);
  std::vector<std::vector<PatchRecord>> per_image(cfg.n_images);
  std::vector<std::string> failures(cfg.n_images);

  const auto n_images = static_cast<std::ptrdiff_t>(cfg.n_images);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < n_images; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const GrayImage ref = procedural_texture(cfg.image_size, derive_seed(cfg.seed, kTextureStream, i));
      const std::string tex = numbered("t%04zu", i);
      save_pgm(ref, out_dir / "ref" / (tex + ".pgm"));

      std::vector<GrayImage> ref_patches;
      for (std::size_t r : origins)
        for (std::size_t c : origins) ref_patches.push_back(ref.crop(r, c, kPatch, kPatch));
      for (std::size_t p = 0; p < ref_patches.size(); ++p)
        save_pgm(ref_patches[p], out_dir / "patches" / (numbered("t%04zu_p%02zu_ref.pgm", i, p)));

      for (std::size_t a = 0; a < cfg.noise_amplitudes.size(); ++a) {
        const double amp = cfg.noise_amplitudes[a];
        Rng rng(derive_seed(cfg.seed, kDistortStream, i, a));
        std::vector<double> noisy(ref.values().begin(), ref.values().end());
        for (double& v : noisy) v += rng.uniform(-amp, amp);
        const GrayImage dist = quantized(std::move(noisy), cfg.image_size, cfg.image_size);
        save_pgm(dist, out_dir / "dist" / numbered("t%04zu_a%zu.pgm", i, a));

        std::size_t p = 0;
        for (std::size_t r : origins) {
          for (std::size_t c : origins) {
            const GrayImage dpatch = dist.crop(r, c, kPatch, kPatch);
            const std::string id = numbered("t%04zu_a%zu_p%02zu", i, a, p);
            save_pgm(dpatch, out_dir / "patches" / (id + "_dist.pgm"));

            const double e = mean_abs_error(ref_patches[p].values(), dpatch.values());
            const double t_star = masking_threshold(ref_patches[p].values(), cfg.t0, cfg.t1);
            const double q = predict_quality({e, t_star, cfg.alpha_true, 1.0}).q_hat;

            PatchRecord rec;
            rec.manifest.reference_path = out_dir / "patches" / numbered("t%04zu_p%02zu_ref.pgm", i, p);
            rec.manifest.distorted_path = out_dir / "patches" / (id + "_dist.pgm");
            rec.manifest.raw_score = q;
            rec.manifest.score_min = 0.0;
            rec.manifest.score_max = 1.0;
            rec.manifest.polarity = Polarity::higher_is_worse;
            rec.oracle = {id, t_star};
            per_image[i].push_back(std::move(rec));
            ++p;
          }
        }
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw DataError("synth: " + f);

  std::vector<ManifestRecord> manifest;
  std::ofstream oracle(out_dir / "oracle.csv", std::ios::trunc);
  if (!oracle) throw DataError("cannot write " + (out_dir / "oracle.csv").string());
  oracle << "patch_id,t_star\n";
  for (const auto& recs : per_image) {
    for (const auto& r : recs) {
      manifest.push_back(r.manifest);
      oracle << r.oracle.patch_id << ',' << format_double(r.oracle.t_star) << '\n';
    }
  }
  if (!oracle) throw DataError("write failed for oracle.csv");

  const fs::path manifest_path = out_dir / "manifest.csv";
  save_manifest(manifest, manifest_path, "synthetic masking-law dataset, seed " + std::to_string(cfg.seed));

  std::ofstream js(out_dir / "synth.json", std::ios::trunc);
  if (!js) throw DataError("cannot write synth.json");
  js << cfg.to_json().dump(2) << '\n';
  return manifest_path;
}

std::vector<OracleEntry> oracle_thresholds(const fs::path& out_dir) {
  const fs::path path = out_dir / "oracle.csv";
  std::ifstream in(path);
  if (!in) throw DataError("no generated tree at " + out_dir.string() + " (missing oracle.csv)");
  std::string line;
  if (!std::getline(in, line) || line != "patch_id,t_star") throw DataError(path.string() + ": bad header");
  std::vector<OracleEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": malformed row '" + line + "'");
    OracleEntry e;
    e.patch_id = line.substr(0, comma);
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    const auto r = std::from_chars(first, last, e.t_star);
    if (r.ec != std::errc() || r.ptr != last) throw DataError(path.string() + ": bad t_star in '" + line + "'");
    out.push_back(std::move(e));
  }
  return out;
}

SynthConfig load_synth_config(const fs::path& out_dir) {
  std::ifstream in(out_dir / "synth.json");
  if (!in) throw DataError("no generated tree at " + out_dir.string() + " (missing synth.json)");
  try {
    return SynthConfig::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth.json: ") + e.what());
  }
}

}  // namespace vth
