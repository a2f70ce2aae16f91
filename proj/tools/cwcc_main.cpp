/* SPDX-License-Identifier: Apache-2.0 */
// Command-line harness: synthesis, training, evaluation, prediction and the
// uncertainty workflow. Subcommands are deterministic given their full flag
// set including --seed; diagnostics go to stderr, data to files/stdout.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cwcc/baselines.hpp"
#include "cwcc/checkpoint.hpp"
#include "cwcc/dataset.hpp"
#include "cwcc/metrics.hpp"
#include "cwcc/model.hpp"
#include "cwcc/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace cwcc;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Audit header for every textual report: version, seed, a hash of the
/// effective configuration, and the checkpoint CRC when one is involved.
void print_report_header(std::uint64_t seed, const std::string& config_desc,
                         std::optional<std::uint32_t> checkpoint_crc) {
  std::cout << "# cwcc " << kVersion << "\n";
  std::cout << "# seed: " << seed << "\n";
  std::cout << "# config_hash: " << hex64(fnv1a(config_desc.data(), config_desc.size())) << "\n";
  if (checkpoint_crc) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", *checkpoint_crc);
    std::cout << "# checkpoint_crc: " << buf << "\n";
  }
}

void print_summary_block(const std::string& title, const ErrorSummary& s) {
  std::cout << title << "\n";
  std::cout << "  best25  " << fixed4(s.best25_mean) << "\n";
  std::cout << "  mean    " << fixed4(s.mean) << "\n";
  std::cout << "  median  " << fixed4(s.median) << "\n";
  std::cout << "  trimean " << fixed4(s.trimean) << "\n";
  std::cout << "  worst25 " << fixed4(s.worst25_mean) << "\n";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("cannot write " + path.string());
  return f;
}

LabeledImage load_labeled(const fs::path& manifest, const Sample& s, int resize_to) {
  LinearImage img = read_image(sample_image_path(manifest, s));
  if (resize_to > 0 && (img.height != resize_to || img.width != resize_to)) {
    img = resize_bilinear(img, resize_to, resize_to);
  }
  return LabeledImage{std::move(img), s.gt.normalized()};
}

std::vector<LabeledImage> load_set(const fs::path& manifest, const std::vector<Sample>& samples,
                                   const std::vector<std::size_t>& idx, int resize_to) {
  std::vector<LabeledImage> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(load_labeled(manifest, samples[i], resize_to));
  return out;
}

/// Deterministic tail carve: the last ceil(frac*n) entries become validation.
void carve_validation(std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx, double frac) {
  if (train_idx.size() < 2) fail("training split needs at least 2 samples");
  std::size_t n_val = std::size_t(std::ceil(double(train_idx.size()) * frac));
  n_val = std::clamp<std::size_t>(n_val, 1, train_idx.size() - 1);
  val_idx.assign(train_idx.end() - long(n_val), train_idx.end());
  train_idx.resize(train_idx.size() - n_val);
}

// ---- synth ----

struct SynthArgs {
  int n = 0;
  int size = 64;
  int folds = 10;
  double exposure_min = 1.0;
  double exposure_max = 1.0;
  double noise = 0.0;
  double noise_max = 0.0;
  bool no_clip = false;
  double tint_r = 1.0, tint_g = 1.0, tint_b = 1.0;
  bool grey_mean = false;
  bool no_achromatic = false;
  double achromatic_prob = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  if (a.n < 1) fail("synth: --n must be >= 1");
  if (a.folds < 1) fail("synth: --folds must be >= 1");
  SynthConfig cfg;
  cfg.size = a.size;
  cfg.exposure_min = a.exposure_min;
  cfg.exposure_max = a.exposure_max;
  cfg.noise_std = a.noise;
  cfg.noise_std_max = a.noise_max;
  cfg.clip = !a.no_clip;
  cfg.tint_r = a.tint_r;
  cfg.tint_g = a.tint_g;
  cfg.tint_b = a.tint_b;
  cfg.enforce_grey_mean = a.grey_mean;
  cfg.achromatic_patch = !a.no_achromatic;
  cfg.achromatic_prob = a.achromatic_prob;
  cfg.seed = a.seed;

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  const auto scenes = synthesize(cfg, a.n);
  std::vector<Sample> samples;
  samples.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "im_%05zu.rif", i);
    write_image(scenes[i].image, out_dir / name);
    samples.push_back(Sample{name, scenes[i].gt, int(i % std::size_t(a.folds))});
  }
  write_manifest(samples, out_dir / "manifest.csv");
  std::cerr << "wrote " << scenes.size() << " images + manifest to " << out_dir.string() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  int epochs = 30;
  int batch = 16;
  double lr = 1e-3;
  double lr_decay = 1.0;
  int input_size = 128;
  std::string variant = "shared";
  int test_fold = -1;
  double val_frac = 0.1;
};

int run_train(const TrainArgs& a) {
  const fs::path manifest(a.manifest);
  const auto samples = load_manifest(manifest);
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (a.test_fold < 0 || samples[i].fold != a.test_fold) train_idx.push_back(i);
  }
  std::vector<std::size_t> val_idx;
  carve_validation(train_idx, val_idx, a.val_frac);

  const auto train_set = load_set(manifest, samples, train_idx, a.input_size);
  const auto val_set = load_set(manifest, samples, val_idx, a.input_size);

  CwccConfig cfg;
  cfg.input_size = a.input_size;
  cfg.variant = variant_from_string(a.variant);
  CwccModel model(cfg, a.seed);

  TrainHyper hyper{a.epochs, a.batch, a.lr, a.lr_decay};
  const auto result = train(model, train_set, val_set, hyper, a.seed);

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  auto log = open_out(out_dir / "train_log.csv");
  log << "epoch,train_err_deg,val_err_deg\n";
  for (const auto& e : result.log) {
    log << e.epoch << ',' << fixed4(e.train_err_deg) << ',' << fixed4(e.val_err_deg) << '\n';
  }
  save_checkpoint(model, out_dir / "checkpoint.bin", CheckpointMeta{a.seed, result.best_epoch});

  std::ostringstream desc;
  desc << "train manifest=" << a.manifest << " epochs=" << a.epochs << " batch=" << a.batch << " lr=" << a.lr
       << " input_size=" << a.input_size << " variant=" << a.variant << " test_fold=" << a.test_fold
       << " val_frac=" << a.val_frac << " seed=" << a.seed;
  print_report_header(a.seed, desc.str(), std::nullopt);
  std::cout << "trained " << a.variant << " model: " << model.count_parameters() << " parameters\n";
  std::cout << "best_epoch " << result.best_epoch << " val_err_deg " << fixed4(result.best_val_err_deg) << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string manifest;
  std::string method = "cwcc";
  std::string checkpoint;
  std::string out;
  int fold = -1;
  int cv = 0;
  double p = 6.0;
  double sigma = 2.0;
  int order = 1;
  std::uint64_t seed = 0;
  // training hyper-parameters for --cv with method cwcc
  int epochs = 30;
  int batch = 16;
  double lr = 1e-3;
  int input_size = 128;
  std::string variant = "shared";
  double val_frac = 0.1;
};

Illuminant baseline_estimate(const EvalArgs& a, const LinearImage& img) {
  if (a.method == "grey_world") return grey_world(img);
  if (a.method == "white_patch") return white_patch(img);
  if (a.method == "shades_of_grey") return shades_of_grey(img, a.p);
  if (a.method == "grey_edge") return grey_edge(img, a.order, a.p, a.sigma);
  fail("eval: unknown method '" + a.method + "'");
}

struct PerImageErrors {
  std::vector<std::string> paths;
  std::vector<double> recovery, reproduction;
};

void append_eval(const EvalArgs& a, const fs::path& manifest, const std::vector<Sample>& samples,
                 const std::vector<std::size_t>& idx, const CwccModel* model, PerImageErrors& out) {
  if (model != nullptr) {
    const auto set = load_set(manifest, samples, idx, model->config().input_size);
    const auto estimates = predict_all(*model, set);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.paths.push_back(samples[idx[i]].path);
      out.recovery.push_back(recovery_error(set[i].gt, estimates[i]));
      out.reproduction.push_back(reproduction_error(set[i].gt, estimates[i]));
    }
    return;
  }
  for (auto i : idx) {
    const auto labeled = load_labeled(manifest, samples[i], 0);
    const Illuminant est = baseline_estimate(a, labeled.image);
    out.paths.push_back(samples[i].path);
    out.recovery.push_back(recovery_error(labeled.gt, est));
    out.reproduction.push_back(reproduction_error(labeled.gt, est));
  }
}

void write_errors_csv(const fs::path& path, const PerImageErrors& e) {
  auto f = open_out(path);
  f << "path,recovery_deg,reproduction_deg\n";
  for (std::size_t i = 0; i < e.paths.size(); ++i) {
    f << e.paths[i] << ',' << fixed4(e.recovery[i]) << ',' << fixed4(e.reproduction[i]) << '\n';
  }
}

ErrorSummary average_summaries(const std::vector<ErrorSummary>& all) {
  ErrorSummary avg;
  for (const auto& s : all) {
    avg.best25_mean += s.best25_mean;
    avg.mean += s.mean;
    avg.median += s.median;
    avg.trimean += s.trimean;
    avg.worst25_mean += s.worst25_mean;
  }
  const double n = double(all.size());
  avg.best25_mean /= n;
  avg.mean /= n;
  avg.median /= n;
  avg.trimean /= n;
  avg.worst25_mean /= n;
  return avg;
}

int run_eval(const EvalArgs& a) {
  const fs::path manifest(a.manifest);
  const auto samples = load_manifest(manifest);

  std::ostringstream desc;
  desc << "eval manifest=" << a.manifest << " method=" << a.method << " fold=" << a.fold << " cv=" << a.cv
       << " p=" << a.p << " sigma=" << a.sigma << " order=" << a.order << " seed=" << a.seed;

  if (a.cv > 0) {
    const auto splits = cross_validation_splits(samples, a.cv);
    std::vector<ErrorSummary> rec, rep;
    print_report_header(a.seed, desc.str(), std::nullopt);
    for (int k = 0; k < a.cv; ++k) {
      PerImageErrors errs;
      if (a.method == "cwcc") {
        auto train_idx = splits[std::size_t(k)].train;
        std::vector<std::size_t> val_idx;
        carve_validation(train_idx, val_idx, a.val_frac);
        const auto train_set = load_set(manifest, samples, train_idx, a.input_size);
        const auto val_set = load_set(manifest, samples, val_idx, a.input_size);
        CwccConfig cfg;
        cfg.input_size = a.input_size;
        cfg.variant = variant_from_string(a.variant);
        CwccModel model(cfg, a.seed ^ std::uint64_t(k));
        train(model, train_set, val_set, TrainHyper{a.epochs, a.batch, a.lr}, a.seed ^ std::uint64_t(k));
        append_eval(a, manifest, samples, splits[std::size_t(k)].test, &model, errs);
      } else {
        append_eval(a, manifest, samples, splits[std::size_t(k)].test, nullptr, errs);
      }
      rec.push_back(summarize(errs.recovery));
      rep.push_back(summarize(errs.reproduction));
      std::cout << "fold " << k << " recovery mean " << fixed4(rec.back().mean) << " reproduction mean "
                << fixed4(rep.back().mean) << "\n";
    }
    print_summary_block("recovery error (deg), average over " + std::to_string(a.cv) + " folds",
                        average_summaries(rec));
    print_summary_block("reproduction error (deg), average over " + std::to_string(a.cv) + " folds",
                        average_summaries(rep));
    return 0;
  }

  std::optional<LoadedCheckpoint> loaded;
  if (a.method == "cwcc") {
    if (a.checkpoint.empty()) fail("eval: method cwcc needs --checkpoint");
    loaded = load_checkpoint(a.checkpoint);
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (a.fold < 0 || samples[i].fold == a.fold) idx.push_back(i);
  }
  if (idx.empty()) fail("eval: no samples selected");
  PerImageErrors errs;
  append_eval(a, manifest, samples, idx, loaded ? &loaded->model : nullptr, errs);

  print_report_header(a.seed, desc.str(), loaded ? std::optional(loaded->crc) : std::nullopt);
  std::cout << "evaluated " << idx.size() << " images with " << a.method << "\n";
  print_summary_block("recovery error (deg)", summarize(errs.recovery));
  print_summary_block("reproduction error (deg)", summarize(errs.reproduction));
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_errors_csv(fs::path(a.out) / "errors.csv", errs);
  }
  return 0;
}

// ---- predict ----

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string corrected;
};

int run_predict(const PredictArgs& a) {
  const auto loaded = load_checkpoint(a.checkpoint);
  LinearImage img = read_image(a.image);
  const int s = loaded.model.config().input_size;
  LinearImage resized = (img.height == s && img.width == s) ? img : resize_bilinear(img, s, s);
  const Illuminant est = loaded.model.forward(resized);
  char line[128];
  std::snprintf(line, sizeof(line), "%.8f %.8f %.8f\n", est.r, est.g, est.b);
  std::cout << line;
  if (!a.corrected.empty()) {
    write_image(correct_image(img, est), a.corrected);
  }
  return 0;
}

// ---- uq ----

struct UqArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::vector<int> test_folds;
  double tau = 2.5;
  int epochs = 300;
  int batch = 32;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

int run_uq(const UqArgs& a) {
  const fs::path manifest(a.manifest);
  const auto samples = load_manifest(manifest);
  auto loaded = load_checkpoint(a.checkpoint);
  const CwccModel& model = loaded.model;

  std::set<int> held(a.test_folds.begin(), a.test_folds.end());
  if (held.empty()) {
    int max_fold = 0;
    for (const auto& s : samples) max_fold = std::max(max_fold, s.fold);
    held.insert(max_fold);
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (held.count(samples[i].fold) ? test_idx : train_idx).push_back(i);
  }
  if (train_idx.empty() || test_idx.empty()) fail("uq: both training and held-out folds must be nonempty");

  const int input = model.config().input_size;
  const auto train_set = load_set(manifest, samples, train_idx, input);
  const auto dataset = build_error_dataset(model, train_set);

  UncertaintyBranch branch(model.config().hidden_units, a.seed);
  train_branch(branch, dataset, BranchHyper{a.epochs, a.batch, a.lr}, a.seed);

  // Held-out scatter, one (predicted, true) pair per image.
  std::vector<std::pair<double, double>> scatter;
  std::vector<int> scatter_folds;
  for (auto i : test_idx) {
    const auto labeled = load_labeled(manifest, samples[i], input);
    const auto pred = predict_with_uncertainty(model, branch, labeled.image);
    scatter.emplace_back(pred.predicted_error_deg, recovery_error(labeled.gt, pred.estimate));
    scatter_folds.push_back(samples[i].fold);
  }

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  auto csv = open_out(out_dir / "scatter.csv");
  csv << "predicted_deg,true_deg\n";
  for (const auto& [p, t] : scatter) csv << fixed4(p) << ',' << fixed4(t) << '\n';
  save_checkpoint(model, out_dir / "checkpoint_uq.bin", CheckpointMeta{a.seed, loaded.meta.epoch}, &branch);

  std::ostringstream desc;
  desc << "uq manifest=" << a.manifest << " tau=" << a.tau << " epochs=" << a.epochs << " batch=" << a.batch
       << " lr=" << a.lr << " seed=" << a.seed;
  print_report_header(a.seed, desc.str(), loaded.crc);
  for (int f : held) {
    std::vector<double> ps, ts;
    for (std::size_t i = 0; i < scatter.size(); ++i) {
      if (scatter_folds[i] == f) {
        ps.push_back(scatter[i].first);
        ts.push_back(scatter[i].second);
      }
    }
    std::cout << "fold " << f << " pearson " << fixed4(pearson(ps, ts)) << "\n";
  }
  const auto report = threshold_filter(scatter, a.tau);
  std::cout << "threshold tau " << fixed4(a.tau) << ": accepted " << report.accepted << " rejected "
            << report.rejected;
  if (report.accepted > 0) {
    std::cout << " worst_accepted_true_deg " << fixed4(report.worst_accepted_true_deg);
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"channel-wise color constancy toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with exact ground truth");
  synth->add_option("--n", sa.n, "number of images")->required();
  synth->add_option("--size", sa.size, "square image size");
  synth->add_option("--folds", sa.folds, "fold count for the manifest");
  synth->add_option("--exposure-min", sa.exposure_min, "lower bound of the per-scene exposure gain");
  synth->add_option("--exposure-max", sa.exposure_max, "upper bound of the per-scene exposure gain");
  synth->add_option("--noise", sa.noise, "Gaussian noise standard deviation");
  synth->add_option("--noise-max", sa.noise_max, "upper bound for a per-scene noise level range");
  synth->add_flag("--no-clip", sa.no_clip, "keep values above 1 instead of clipping");
  synth->add_option("--tint-r", sa.tint_r, "reflectance tint, red");
  synth->add_option("--tint-g", sa.tint_g, "reflectance tint, green");
  synth->add_option("--tint-b", sa.tint_b, "reflectance tint, blue");
  synth->add_flag("--grey-mean", sa.grey_mean, "rescale reflectance to an exactly grey mean");
  synth->add_flag("--no-achromatic", sa.no_achromatic, "drop the per-scene achromatic patch");
  synth->add_option("--achromatic-prob", sa.achromatic_prob, "probability a scene gets an achromatic patch");
  synth->add_option("--seed", sa.seed, "RNG seed");
  synth->add_option("--out", sa.out, "output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a CWCC model");
  tr->add_option("--manifest", ta.manifest, "dataset manifest")->required();
  tr->add_option("--out", ta.out, "output directory")->required();
  tr->add_option("--seed", ta.seed, "RNG seed");
  tr->add_option("--epochs", ta.epochs, "training epochs");
  tr->add_option("--batch", ta.batch, "batch size");
  tr->add_option("--lr", ta.lr, "Adam learning rate");
  tr->add_option("--lr-decay", ta.lr_decay, "per-epoch learning-rate multiplier");
  tr->add_option("--input-size", ta.input_size, "model input resolution");
  tr->add_option("--variant", ta.variant, "shared|per_channel");
  tr->add_option("--test-fold", ta.test_fold, "fold to exclude from training (-1: none)");
  tr->add_option("--val-frac", ta.val_frac, "fraction of training data used for validation");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate a model or baseline over a manifest");
  ev->add_option("--manifest", ea.manifest, "dataset manifest")->required();
  ev->add_option("--method", ea.method, "cwcc|grey_world|white_patch|shades_of_grey|grey_edge");
  ev->add_option("--checkpoint", ea.checkpoint, "trained model (method cwcc)");
  ev->add_option("--out", ea.out, "directory for the per-image errors CSV");
  ev->add_option("--fold", ea.fold, "evaluate this fold only (-1: all)");
  ev->add_option("--cv", ea.cv, "run the full cross-validation loop with this fold count");
  ev->add_option("--p", ea.p, "Minkowski order");
  ev->add_option("--sigma", ea.sigma, "grey-edge Gaussian sigma");
  ev->add_option("--order", ea.order, "grey-edge derivative order (1|2)");
  ev->add_option("--seed", ea.seed, "RNG seed (cv training)");
  ev->add_option("--epochs", ea.epochs, "cv training epochs");
  ev->add_option("--batch", ea.batch, "cv training batch size");
  ev->add_option("--lr", ea.lr, "cv training learning rate");
  ev->add_option("--input-size", ea.input_size, "cv model input resolution");
  ev->add_option("--variant", ea.variant, "cv model variant");
  ev->add_option("--val-frac", ea.val_frac, "cv validation fraction");

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "estimate the illuminant of one image");
  pr->add_option("--checkpoint", pa.checkpoint, "trained model")->required();
  pr->add_option("--image", pa.image, "input image (RIF or PNG)")->required();
  pr->add_option("--corrected", pa.corrected, "write the white-balanced image here");

  UqArgs ua;
  auto* uq = app.add_subcommand("uq", "train and evaluate the uncertainty branch");
  uq->add_option("--checkpoint", ua.checkpoint, "trained backbone")->required();
  uq->add_option("--manifest", ua.manifest, "dataset manifest")->required();
  uq->add_option("--out", ua.out, "output directory")->required();
  uq->add_option("--test-fold", ua.test_folds, "held-out fold(s); default: the highest fold");
  uq->add_option("--tau", ua.tau, "predicted-error acceptance threshold, degrees");
  uq->add_option("--epochs", ua.epochs, "branch training epochs");
  uq->add_option("--batch", ua.batch, "branch batch size");
  uq->add_option("--lr", ua.lr, "branch learning rate");
  uq->add_option("--seed", ua.seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(sa);
    if (tr->parsed()) return run_train(ta);
    if (ev->parsed()) return run_eval(ea);
    if (pr->parsed()) return run_predict(pa);
    if (uq->parsed()) return run_uq(ua);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
