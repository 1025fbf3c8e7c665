#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vth/error.hpp"
#include "vth/manifest.hpp"
#include "vth/mixing.hpp"
#include "vth/synth.hpp"
#include "vth/trainer.hpp"

using namespace vth;

namespace {

SynthConfig small() {
  SynthConfig cfg;
  cfg.n_images = 3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("defaults") {
  const SynthConfig cfg;
  CHECK(cfg.image_size == 64);
  CHECK(cfg.noise_amplitudes == std::vector<double>{0.01, 0.03, 0.06, 0.10});
  CHECK(cfg.alpha_true == 1.0);
  CHECK(cfg.t0 == 0.02);
  CHECK(cfg.t1 == 0.5);
  CHECK(cfg.patch_stride == 8);
  auto bad = cfg;
  bad.noise_amplitudes = {0.01, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.t0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const auto back = SynthConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("masking law") {
  const std::vector<double> flat(1024, 0.4);
  CHECK(masking_threshold(flat, 0.02, 0.5) == 0.02);
  Rng rng(2);
  std::vector<double> v(1024);
  for (double& x : v) x = rng.uniform();
  const double t = masking_threshold(v, 0.02, 0.5);
  CHECK(t == doctest::Approx(0.02 + 0.5 * oracle::population_std(v)).epsilon(1e-13));
  CHECK(t >= 0.02);
}

TEST_CASE("textures are seeded and stay inside [0.1, 0.9]") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto a = procedural_texture(64, s);
    CHECK(a == procedural_texture(64, s));
    for (double v : a.values()) {
      CHECK(v >= 0.1 - 0.5 / 255.0);
      CHECK(v <= 0.9 + 0.5 / 255.0);
      CHECK(v * 255.0 == std::round(v * 255.0));  // on the 8-bit lattice
    }
  }
  CHECK_FALSE(procedural_texture(64, 1) == procedural_texture(64, 2));
}

TEST_CASE("generated tree is self-consistent") {
  const auto dir = oracle::scratch("synth");
  const auto cfg = small();
  const auto manifest_path = generate(cfg, dir / "out");
  CHECK(manifest_path == dir / "out" / "manifest.csv");
  const auto recs = load_manifest(manifest_path);
  const auto oracle_rows = oracle_thresholds(dir / "out");
  const std::size_t per_axis = patch_grid(cfg.image_size, 32, cfg.patch_stride).size();
  REQUIRE(recs.size() == cfg.n_images * cfg.noise_amplitudes.size() * per_axis * per_axis);
  REQUIRE(oracle_rows.size() == recs.size());
  CHECK(std::filesystem::exists(dir / "out" / "synth.json"));
  CHECK(load_synth_config(dir / "out").to_json() == cfg.to_json());
  CHECK(std::filesystem::exists(dir / "out" / "ref" / "t0000.pgm"));
  CHECK(std::filesystem::exists(dir / "out" / "dist" / "t0002_a3.pgm"));

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    CHECK(r.polarity == Polarity::higher_is_worse);
    CHECK(r.score_min == 0.0);
    CHECK(r.score_max == 1.0);
    const auto ref = load_pgm(r.reference_path);
    const auto dist = load_pgm(r.distorted_path);
    CHECK(ref.width() == 32);
    CHECK(dist.height() == 32);
    // T* recomputed from the saved reference patch, and q from E and T*.
    const double t_star = cfg.t0 + cfg.t1 * oracle::population_std(ref.values());
    CHECK(std::abs(oracle_rows[i].t_star - t_star) < 1e-9);
    CHECK(oracle_rows[i].t_star >= cfg.t0);
    double e = 0.0;
    for (std::size_t k = 0; k < 1024; ++k) e += std::abs(dist.values()[k] - ref.values()[k]);
    e /= 1024.0;
    CHECK(std::abs(r.raw_score - (1.0 - std::exp(-cfg.alpha_true * e / t_star))) < 1e-12);
    CHECK(r.raw_score > 0.0);
    // Each record's id names its distorted patch file.
    CHECK(r.distorted_path.filename().string() == oracle_rows[i].patch_id + "_dist.pgm");
  }
}

TEST_CASE("larger amplitudes give larger errors on the same patch") {
  const auto dir = oracle::scratch("synth_amp");
  const auto cfg = small();
  const auto recs = load_quality_records(load_manifest(generate(cfg, dir)));
  const std::size_t per_axis = patch_grid(cfg.image_size, 32, cfg.patch_stride).size();
  const std::size_t patches = per_axis * per_axis;
  const std::size_t per_image = patches * cfg.noise_amplitudes.size();
  for (std::size_t img = 0; img < cfg.n_images; ++img)
    for (std::size_t p = 0; p < patches; ++p) {
      double prev = 0.0;
      for (std::size_t a = 0; a < cfg.noise_amplitudes.size(); ++a) {
        const auto& r = recs[img * per_image + a * patches + p];
        const double e = mean_abs_error(r.reference.values(), r.distorted.values());
        CHECK(e > prev);
        prev = e;
      }
    }
}

TEST_CASE("generation is deterministic") {
  const auto dir = oracle::scratch("synth_det");
  const auto cfg = small();
  generate(cfg, dir / "a");
  generate(cfg, dir / "b");
  for (const char* f : {"manifest.csv", "oracle.csv", "synth.json", "ref/t0001.pgm", "dist/t0001_a2.pgm",
                        "patches/t0002_a1_p00_dist.pgm"})
    CHECK(oracle::slurp(dir / "a" / f) == oracle::slurp(dir / "b" / f));
  auto other = cfg;
  other.seed = 12;
  generate(other, dir / "c");
  CHECK(oracle::slurp(dir / "a" / "oracle.csv") != oracle::slurp(dir / "c" / "oracle.csv"));
}

TEST_CASE("oracle lookup errors") {
  const auto dir = oracle::scratch("synth_missing");
  CHECK_THROWS_AS(oracle_thresholds(dir), DataError);
}
