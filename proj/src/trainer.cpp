#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "vth/error.hpp"
#include "vth/mixing.hpp"
#include "vth/rng.hpp"
#include "vth/trainer.hpp"

namespace vth {

namespace {

// Stream tags for derive_seed so independent random uses never collide.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;  // "noise"
constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"
constexpr std::uint64_t kEpochStream = 0x65706f6368;  // "epoch"
constexpr std::uint64_t kDropStream = 0x64726f70;     // "drop"

constexpr std::size_t kReductionChunks = 8;

}  // namespace

void TrainConfig::validate() const {
  if (patch_stride == 0 || batch_size == 0 || epochs == 0)
    throw std::invalid_argument("train config: stride, batch size and epochs must be positive");
  if (!(learning_rate > 0.0) || !(adam_eps > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("train config: learning rate, adam eps and beta must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("train config: adam betas must lie in (0, 1)");
  if (!(e_min > 0.0)) throw std::invalid_argument("train config: e_min must be positive");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("train config: holdout fraction must lie in (0, 1)");
  if (!(input_noise_sigma >= 0.0)) throw std::invalid_argument("train config: noise sigma must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"patch_stride", patch_stride},   {"batch_size", batch_size},
          {"epochs", epochs},               {"learning_rate", learning_rate},
          {"adam_beta1", adam_beta1},       {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},           {"seed", seed},
          {"e_min", e_min},                 {"holdout_fraction", holdout_fraction},
          {"beta", beta},                   {"input_noise_sigma", input_noise_sigma},
          {"split_by_image", split_by_image}};
}

std::vector<std::size_t> patch_grid(std::size_t extent, std::size_t patch, std::size_t stride) {
  if (extent < patch) return {};
  std::vector<std::size_t> origins;
  for (std::size_t o = 0; o + patch <= extent; o += stride) origins.push_back(o);
  if (origins.back() + patch < extent) origins.push_back(extent - patch);
  return origins;
}

std::vector<TrainingSample> build_samples(std::span<const QualityRecord> records, const TrainConfig& cfg) {
  constexpr std::size_t n = arch::kPatch;
  std::vector<TrainingSample> samples;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.distorted.width() < n || rec.distorted.height() < n)
      throw DataError("record " + std::to_string(r) + ": image " + std::to_string(rec.distorted.width()) + "x" +
                      std::to_string(rec.distorted.height()) + " is smaller than a 32x32 patch");
    if (rec.reference.width() != rec.distorted.width() || rec.reference.height() != rec.distorted.height())
      throw DataError("record " + std::to_string(r) + ": reference and distorted sizes differ");

    const auto rows = patch_grid(rec.distorted.height(), n, cfg.patch_stride);
    const auto cols = patch_grid(rec.distorted.width(), n, cfg.patch_stride);

    std::shared_ptr<SampleSource> source;
    for (std::size_t row : rows) {
      for (std::size_t col : cols) {
        double sum = 0.0;
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x)
            sum += std::abs(rec.distorted.at(row + y, col + x) - rec.reference.at(row + y, col + x));
        const double error = sum / static_cast<double>(n * n);
        if (error < cfg.e_min) continue;

        if (!source) {
          GrayImage input = rec.distorted;
          if (cfg.input_noise_sigma > 0.0) {
            Rng rng(derive_seed(cfg.seed, kNoiseStream, r));
            std::vector<double> noisy(input.values().begin(), input.values().end());
            for (double& v : noisy) v = std::clamp(v + cfg.input_noise_sigma * rng.normal(), 0.0, 1.0);
            input = GrayImage(input.width(), input.height(), std::move(noisy));
          }
          FeatureMaps maps = default_features(input);
          source = std::make_shared<SampleSource>(SampleSource{std::move(input), std::move(maps)});
        }
        samples.push_back({source, {row, col}, error, rec.q_global, r});
      }
    }
  }
  return samples;
}

void adam_step(PNetParams& params, const PNetGrads& grads, AdamState& state, const TrainConfig& cfg,
               std::uint64_t t) {
  const std::size_t n = params.size();
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n) throw std::invalid_argument("adam_step: state shape mismatch");
  if (t == 0) throw std::invalid_argument("adam_step: step index is 1-based");

  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  auto p = params.values();
  auto g = grads.values();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

DataSplit split_samples(std::span<const TrainingSample> samples, const TrainConfig& cfg) {
  DataSplit split;
  Rng rng(derive_seed(cfg.seed, kSplitStream));
  if (!cfg.split_by_image) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    std::size_t n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(order.size())));
    n_hold = std::min(n_hold, order.size() > 0 ? order.size() - 1 : 0);
    split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  } else {
    std::vector<std::size_t> records;
    for (const auto& s : samples) records.push_back(s.record_index);
    std::sort(records.begin(), records.end());
    records.erase(std::unique(records.begin(), records.end()), records.end());
    shuffle(records, rng);
    std::size_t n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(records.size())));
    n_hold = std::min(n_hold, records.size() > 0 ? records.size() - 1 : 0);
    std::vector<bool> held(records.empty() ? 0 : *std::max_element(records.begin(), records.end()) + 1, false);
    for (std::size_t i = 0; i < n_hold; ++i) held[records[i]] = true;
    for (std::size_t i = 0; i < samples.size(); ++i) (held[samples[i].record_index] ? split.holdout : split.train).push_back(i);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

double batch_gradient(const PNetParams& params, std::span<const TrainingSample> samples,
                      std::span<const std::size_t> batch, const TrainConfig& cfg, std::uint64_t epoch,
                      std::uint64_t batch_index, PNetGrads& mean_grads, Execution exec) {
  const std::size_t count = batch.size();
  const std::size_t chunks = std::min(kReductionChunks, count);
  std::vector<PNetGrads> partial(chunks);
  std::vector<double> losses(count, 0.0);
  const double alpha = alpha_of(params);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t first = c * count / chunks;
    const std::size_t last = (c + 1) * count / chunks;
    for (std::size_t k = first; k < last; ++k) {
      const std::size_t id = batch[k];
      const TrainingSample& s = samples[id];
      const auto mode = ForwardMode::training(derive_seed(cfg.seed, kDropStream, epoch, batch_index, id));
      const ForwardTrace trace = forward(s.patch(), params, mode);
      const MixInput mix{s.error, trace.threshold, alpha, cfg.beta};
      losses[k] = sample_loss(s.q_target, predict_quality(mix).q_hat).loss;
      const MixGradient g = grad_wrt_threshold_alpha(mix, s.q_target);
      backward(trace, params, g.dloss_dthreshold, partial[c]);
      partial[c].log_alpha() += g.dloss_dlog_alpha;
    }
  };

  const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < n_chunks; ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::ptrdiff_t c = 0; c < n_chunks; ++c) run_chunk(static_cast<std::size_t>(c));
  }

  auto out = mean_grads.values();
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& p : partial) {
    const auto v = p.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : out) v *= inv;

  double loss_sum = 0.0;
  for (double l : losses) loss_sum += l;
  return loss_sum;
}

double mean_loss(const PNetParams& params, std::span<const TrainingSample> samples,
                 std::span<const std::size_t> indices, double beta) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(indices.size());
  const double alpha = alpha_of(params);
  const auto n = static_cast<std::ptrdiff_t>(indices.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const TrainingSample& s = samples[indices[static_cast<std::size_t>(k)]];
    const double t = predict_threshold(s.patch(), params);
    losses[static_cast<std::size_t>(k)] =
        sample_loss(s.q_target, predict_quality({s.error, t, alpha, beta}).q_hat).loss;
  }
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(indices.size());
}

nlohmann::json TrainReport::to_json() const {
  auto nullable = [](const std::vector<double>& xs) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : xs) arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return arr;
  };
  return {{"train_loss", nullable(train_loss)}, {"holdout_loss", nullable(holdout_loss)},
          {"epoch_seconds", epoch_seconds},     {"final_alpha", final_alpha},
          {"n_train", n_train},                 {"n_holdout", n_holdout},
          {"config", config.to_json()},         {"seed", config.seed}};
}

TrainResult train(std::span<const TrainingSample> samples, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw DataError("no training samples (empty dataset or every patch has E < e_min)");

  TrainResult result;
  result.split = split_samples(samples, cfg);
  result.params = init_params(cfg.seed);
  result.report.config = cfg;
  result.report.n_train = result.split.train.size();
  result.report.n_holdout = result.split.holdout.size();

  AdamState adam;
  PNetGrads grads;
  std::uint64_t step = 0;
  std::vector<std::size_t> order = result.split.train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::sort(order.begin(), order.end());
    Rng rng(derive_seed(cfg.seed, kEpochStream, epoch));
    shuffle(order, rng);

    double loss_sum = 0.0;
    std::uint64_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + first, last - first);
      const double batch_loss = batch_gradient(result.params, samples, batch, cfg, epoch, batch_index, grads);
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      loss_sum += batch_loss;
      adam_step(result.params, grads, adam, cfg, ++step);
    }
    for (double v : result.params.values()) {
      if (!std::isfinite(v)) throw NumericError("non-finite parameter after epoch " + std::to_string(epoch));
    }

    result.report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    result.report.holdout_loss.push_back(mean_loss(result.params, samples, result.split.holdout, cfg.beta));
    result.report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    result.report.final_alpha = alpha_of(result.params);
    if (on_epoch) on_epoch(epoch, result.report);
  }
  return result;
}

TrainResult train(std::span<const QualityRecord> records, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (records.empty()) throw DataError("no training records");
  const auto samples = build_samples(records, cfg);
  return train(samples, cfg, on_epoch);
}

nlohmann::json checkpoint_meta(const TrainResult& result) {
  return {{"format", "visibility-threshold P-net"},
          {"config", result.report.config.to_json()},
          {"seed", result.report.config.seed},
          {"n_train", result.report.n_train},
          {"n_holdout", result.report.n_holdout},
          {"final_alpha", result.report.final_alpha}};
}

}  // namespace vth
