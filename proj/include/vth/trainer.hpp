#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "vth/features.hpp"
#include "vth/manifest.hpp"
#include "vth/pnet.hpp"

namespace vth {

struct TrainConfig {
  std::size_t patch_stride = 16;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double e_min = 1e-6;
  double holdout_fraction = 0.2;
  double beta = 1.0;               // mixing exponent, fixed during training
  double input_noise_sigma = 0.0;  // extra Gaussian noise on P-net inputs, [0,1] luminance scale
  bool split_by_image = false;

  // Throws std::invalid_argument on a non-positive field or a holdout
  // fraction outside (0, 1).
  void validate() const;
  nlohmann::json to_json() const;
};

// Distorted image (with optional extra noise) plus its feature maps, shared
// by every sample cut from it.
struct SampleSource {
  GrayImage image;
  FeatureMaps maps;
};

struct TrainingSample {
  std::shared_ptr<const SampleSource> source;
  PatchOrigin origin;
  double error = 0.0;     // mean absolute error against the aligned reference patch
  double q_target = 0.0;  // the record's global score
  std::size_t record_index = 0;

  AugmentedPatch patch() const { return augment_patch(source->maps, source->image, origin, arch::kPatch); }
};

// Patch origins along one axis: 0, s, 2s, ... plus a final origin flush with
// the border when the stride does not land on it.
std::vector<std::size_t> patch_grid(std::size_t extent, std::size_t patch, std::size_t stride);

// Throws DataError for images smaller than a patch.
std::vector<TrainingSample> build_samples(std::span<const QualityRecord> records, const TrainConfig& cfg);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

// One Adam update with bias correction; t is the 1-based step index.
void adam_step(PNetParams& params, const PNetGrads& grads, AdamState& state, const TrainConfig& cfg,
               std::uint64_t t);

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

DataSplit split_samples(std::span<const TrainingSample> samples, const TrainConfig& cfg);

enum class Execution { serial, parallel };

// Mean gradient of the batch loss. Samples are processed in a fixed number
// of contiguous chunks that are reduced in index order, so serial and
// parallel execution give bit-identical results for any thread count.
// Returns the summed (not averaged) loss.
double batch_gradient(const PNetParams& params, std::span<const TrainingSample> samples,
                      std::span<const std::size_t> batch, const TrainConfig& cfg, std::uint64_t epoch,
                      std::uint64_t batch_index, PNetGrads& mean_grads, Execution exec = Execution::parallel);

// Mean eval-mode loss over the given samples.
double mean_loss(const PNetParams& params, std::span<const TrainingSample> samples,
                 std::span<const std::size_t> indices, double beta);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> holdout_loss;  // NaN when the holdout split is empty
  std::vector<double> epoch_seconds;
  double final_alpha = 1.0;
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  TrainConfig config;

  nlohmann::json to_json() const;
};

struct TrainResult {
  PNetParams params;
  TrainReport report;
  DataSplit split;
};

using EpochCallback = std::function<void(std::size_t epoch, const TrainReport&)>;

// Throws DataError when no sample survives filtering and NumericError when
// the loss becomes non-finite.
TrainResult train(std::span<const TrainingSample> samples, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
TrainResult train(std::span<const QualityRecord> records, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Checkpoint metadata for a finished run (no timings, so reruns are
// byte-identical).
nlohmann::json checkpoint_meta(const TrainResult& result);

}  // namespace vth
