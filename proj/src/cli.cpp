#include <omp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "vth/checkpoint.hpp"
#include "vth/cli.hpp"
#include "vth/error.hpp"
#include "vth/evaluation.hpp"
#include "vth/gradcheck.hpp"
#include "vth/inference.hpp"
#include "vth/manifest.hpp"
#include "vth/synth.hpp"
#include "vth/trainer.hpp"

namespace vth::cli {

namespace fs = std::filesystem;

namespace {

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw DataError("write failed for " + path.string());
}

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string report;
  TrainConfig cfg;
};

struct PredictArgs {
  std::string model;
  std::string image;
  std::size_t stride = 16;
  std::string out;
  bool pgm = false;
};

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::string band;
  std::string image;
  std::string out;
};

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::size_t coords = 200;
  bool train_mode = false;
};

struct HistogramArgs {
  std::string manifest;
  std::string out;
  std::size_t stride = 32;
};

int do_synth(const SynthArgs& a, std::ostream& out) {
  const SynthConfig& cfg = a.cfg;
  const auto manifest = generate(cfg, a.out);
  const auto oracle = oracle_thresholds(a.out);
  out << "synth: " << oracle.size() << " patch records from " << cfg.n_images << " textures -> " << manifest.string()
      << '\n';
  return kOk;
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto records = load_quality_records(load_manifest(a.manifest));
  if (records.empty()) throw DataError("manifest " + a.manifest + " has no records");
  const auto samples = build_samples(records, a.cfg);
  out << std::setprecision(6);
  const auto result = train(samples, a.cfg, [&out, &a](std::size_t epoch, const TrainReport& r) {
    out << "epoch " << epoch + 1 << "/" << a.cfg.epochs << " train_loss=" << r.train_loss.back()
        << " holdout_loss=" << r.holdout_loss.back() << " alpha=" << r.final_alpha << " (" << std::fixed
        << std::setprecision(1) << r.epoch_seconds.back() << "s)" << std::defaultfloat << std::setprecision(6)
        << '\n';
  });
  save_checkpoint(result.params, checkpoint_meta(result), a.out);
  if (!a.report.empty()) write_json(result.report.to_json(), a.report);
  out << "train: " << samples.size() << " samples (" << result.report.n_train << " train, "
      << result.report.n_holdout << " holdout), final train loss " << result.report.train_loss.back() << ", alpha "
      << result.report.final_alpha << " -> " << a.out << '\n';
  return kOk;
}

int do_predict(const PredictArgs& a, std::ostream& out) {
  const PNetParams params = load_checkpoint(a.model);
  const GrayImage img = load_pgm(a.image);
  const ThresholdMap map = predict_map(img, params, a.stride);
  export_map(map, a.out, params_fingerprint(params));
  if (a.pgm) save_pgm(normalize_map(map), with_suffix(a.out, ".pgm"));
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  out << "predict: " << map.rows << "x" << map.cols << " map (stride " << map.stride << "), T in [" << *lo << ", "
      << *hi << "] -> " << with_suffix(a.out, ".csv").string() << '\n';
  return kOk;
}

LuminanceBand parse_band(const std::string& text) {
  const auto comma = text.find(',');
  LuminanceBand b;
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    b.lo = std::stod(text.substr(0, comma), &used);
    b.hi = std::stod(text.substr(comma + 1), &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("--band expects LO,HI, got '" + text + "'");
  }
  if (!(b.lo <= b.hi)) throw std::invalid_argument("--band: LO must not exceed HI");
  return b;
}

int do_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const ThresholdMap full = import_map(a.pred);
  const GroundTruthGrid gt = load_groundtruth(a.gt);
  if (gt.rows > full.rows || gt.cols > full.cols)
    throw DataError("ground truth grid " + std::to_string(gt.rows) + "x" + std::to_string(gt.cols) +
                    " is finer than the predicted map " + std::to_string(full.rows) + "x" + std::to_string(full.cols));
  const ThresholdMap map = decimate_map(full, gt.rows, gt.cols);
  PairedData data = pair_with_map(gt, map);
  std::string luminance_source = data.luminance.empty() ? "none" : "ground_truth";
  if (!a.image.empty()) {
    data.luminance = footprint_luminance(load_pgm(a.image), gt.rows, gt.cols);
    luminance_source = "image";
  }

  const std::optional<LuminanceBand> band =
      a.band.empty() ? std::optional<LuminanceBand>(LuminanceBand{}) : parse_band(a.band);
  const EvalResult all = evaluate(data);
  nlohmann::json report = {{"prediction", a.pred},
                           {"ground_truth", a.gt},
                           {"grid", {gt.rows, gt.cols}},
                           {"source_grid", {full.rows, full.cols}},
                           {"luminance_source", luminance_source},
                           {"all", all.to_json()}};
  std::ostringstream summary;
  summary << "evaluate: n=" << all.n_total << " plcc_raw=" << all.plcc_raw << " plcc_fitted=" << all.plcc_fitted
          << " rmse_fitted=" << all.rmse_fitted;
  if (!data.luminance.empty()) {
    const EvalResult filtered = evaluate(data, band);
    report["filtered"] = filtered.to_json();
    summary << " | band [" << band->lo << "," << band->hi << "] kept " << filtered.n_kept
            << " plcc_fitted=" << filtered.plcc_fitted << " rmse_fitted=" << filtered.rmse_fitted;
  } else {
    report["filtered"] = nullptr;
  }
  write_json(report, a.out);
  out << summary.str() << " -> " << a.out << '\n';
  return kOk;
}

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  GradcheckOptions opt;
  opt.seed = a.seed;
  opt.coordinates = a.coords;
  opt.train_mode = a.train_mode;
  const auto r = gradcheck(opt);
  out << "gradcheck: seed " << r.seed << ", " << r.checked << " coordinates (" << r.skipped_kinks
      << " kink-crossing draws resampled), max relative error " << std::scientific << std::setprecision(3)
      << r.max_rel_error << std::defaultfloat << (r.passed ? " (pass)" : " (FAIL)") << '\n';
  return r.passed ? kOk : kNumericError;
}

int do_histogram(const HistogramArgs& a, std::ostream& out) {
  const auto records = load_manifest(a.manifest);
  std::set<fs::path> seen;
  std::vector<GrayImage> images;
  for (const auto& r : records)
    if (seen.insert(r.reference_path).second) images.push_back(load_pgm(r.reference_path));
  const auto bins = intensity_histogram(images, arch::kPatch, a.stride);
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw DataError("cannot write " + a.out);
  f << "bin,count\n";
  std::size_t total = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    f << i << ',' << bins[i] << '\n';
    total += bins[i];
  }
  if (!f) throw DataError("write failed for " + a.out);
  out << "histogram: " << total << " patches from " << images.size() << " reference images -> " << a.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{
      "Learn local distortion-visibility thresholds from image quality scores.\n\n"
      "File formats:\n"
      "  images     binary PGM (P5, maxval 255), luminance only\n"
      "  manifest   CSV 'reference,distorted,raw_score,score_min,score_max,polarity'; paths relative to the\n"
      "             manifest; polarity is higher_is_worse or higher_is_better; '#' lines ignored\n"
      "  checkpoint 'VTH1' binary with little-endian f64 parameters and a JSON trailer\n"
      "  map        PREFIX.csv (one grid row per line) + PREFIX.json sidecar\n"
      "  gt         CSV 'row,col,threshold_db[,luminance]' (dB RMS contrast, luminance 0..255)\n",
      "vth"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: machine parallelism)")->check(CLI::NonNegativeNumber);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic masking-law dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--seed", sa.cfg.seed, "Generator seed")->capture_default_str();
  synth->add_option("--n", sa.cfg.n_images, "Number of base textures")->capture_default_str();
  synth->add_option("--size", sa.cfg.image_size, "Texture side length in pixels")->capture_default_str();
  synth->add_option("--patch-stride", sa.cfg.patch_stride, "Spacing of the 32x32 patch records")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the P-net and alpha on a manifest");
  train_cmd->add_option("--manifest", ta.manifest, "Manifest CSV")->required();
  train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", ta.cfg.epochs, "Training epochs")->required();
  train_cmd->add_option("--lr", ta.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", ta.cfg.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--stride", ta.cfg.patch_stride, "Patch stride in pixels")->capture_default_str();
  train_cmd->add_option("--seed", ta.cfg.seed, "Seed for init, split, shuffling and dropout")->capture_default_str();
  train_cmd->add_option("--holdout", ta.cfg.holdout_fraction, "Holdout fraction in (0,1)")->capture_default_str();
  train_cmd->add_option("--noise-sigma", ta.cfg.input_noise_sigma,
                        "Extra Gaussian noise on P-net inputs ([0,1] scale, e.g. 0.0196 for 5/255)")
      ->capture_default_str();
  train_cmd->add_flag("--split-by-image", ta.cfg.split_by_image, "Hold out whole records instead of samples");
  train_cmd->add_option("--report", ta.report, "Write the training report JSON here");

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict a threshold map for an image");
  predict->add_option("--model", pa.model, "Checkpoint")->required();
  predict->add_option("--image", pa.image, "PGM image")->required();
  predict->add_option("--stride", pa.stride, "Patch stride in pixels")->capture_default_str();
  predict->add_option("--out", pa.out, "Output prefix for .csv/.json(/.pgm)")->required();
  predict->add_flag("--pgm", pa.pgm, "Also write a normalized PREFIX.pgm rendering");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compare a threshold map against ground truth");
  eval_cmd->add_option("--pred", ea.pred, "Map prefix written by predict")->required();
  eval_cmd->add_option("--gt", ea.gt, "Ground-truth CSV")->required();
  eval_cmd->add_option("--band", ea.band, "Luminance band LO,HI for outlier filtering (default 10,250)");
  eval_cmd->add_option("--image", ea.image, "Image whose cell footprints give the luminance values");
  eval_cmd->add_option("--out", ea.out, "Report JSON")->required();

  GradcheckArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  grad_cmd->add_option("--seed", ga.seed, "Problem seed")->capture_default_str();
  grad_cmd->add_option("--coords", ga.coords, "Coordinates to check")->capture_default_str();
  grad_cmd->add_flag("--train-mode", ga.train_mode, "Check with a fixed dropout mask");

  HistogramArgs ha;
  auto* hist = app.add_subcommand("histogram", "Histogram of mean 32x32 patch luminance");
  hist->add_option("--manifest", ha.manifest, "Manifest CSV")->required();
  hist->add_option("--out", ha.out, "Output CSV")->required();
  hist->add_option("--stride", ha.stride, "Patch stride in pixels")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    if (*synth) return do_synth(sa, out);
    if (*train_cmd) return do_train(ta, out);
    if (*predict) return do_predict(pa, out);
    if (*eval_cmd) return do_evaluate(ea, out);
    if (*grad_cmd) return do_gradcheck(ga, out);
    if (*hist) return do_histogram(ha, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace vth::cli
