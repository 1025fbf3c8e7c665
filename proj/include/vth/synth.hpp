#pragma once

// Deterministic synthetic dataset with a known masking law, so the whole
// learn-thresholds-from-quality pipeline can be checked without licensed
// data.
//
// Each base texture is a sum of 8 random 2-D sinusoids plus uniform noise,
// centred on 0.5 with a random contrast gain in [1/16, 1] (full gain spans
// [0.1, 0.9]) and quantized to 8 bits. Every distortion amplitude A adds
// uniform noise in [-A, A] (clipped, quantized). Each 32x32 patch, taken every
// patch_stride pixels, becomes its own manifest record whose score is
//
//   q = 1 - exp(-alpha_true * E / T*),   T* = t0 + t1 * std(reference patch),
//
// computed from the quantized pixels, so the per-patch score is exactly what
// the trainer will reconstruct. All randomness comes from xoshiro256**
// seeded through SplitMix64 (see vth/rng.hpp).
//
// Output tree:
//   manifest.csv   standard manifest, one row per (texture, amplitude, patch)
//   oracle.csv     patch_id,t_star in manifest order
//   synth.json     generator configuration
//   ref/ dist/     full-size textures and distorted versions
//   patches/       per-patch reference and distorted crops

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vth/image.hpp"

namespace vth {

struct SynthConfig {
  std::size_t n_images = 200;
  std::size_t image_size = 64;
  std::vector<double> noise_amplitudes{0.01, 0.03, 0.06, 0.10};
  double alpha_true = 1.0;
  double t0 = 0.02;
  double t1 = 0.5;
  std::uint64_t seed = 7;
  std::size_t patch_stride = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

// T* = t0 + t1 * population standard deviation of the patch.
double masking_threshold(std::span<const double> patch, double t0, double t1);

GrayImage procedural_texture(std::size_t size, std::uint64_t seed);

// Writes the tree described above and returns the manifest path.
std::filesystem::path generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

struct OracleEntry {
  std::string patch_id;
  double t_star = 0.0;
};

// Reads oracle.csv from a generated tree. Throws DataError when missing.
std::vector<OracleEntry> oracle_thresholds(const std::filesystem::path& out_dir);

SynthConfig load_synth_config(const std::filesystem::path& out_dir);

}  // namespace vth
