/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cwcc {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void paint_rect(LinearImage& img, int x0, int y0, int w, int h, const double rgb[3]) {
  const int x1 = std::min(img.width, x0 + w);
  const int y1 = std::min(img.height, y0 + h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = float(rgb[c]);
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e;
}

bool parse_int(const std::string& s, int& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void SynthConfig::validate() const {
  if (size < 8) fail("synth: image size must be >= 8");
  if (patches_min < 1 || patches_max < patches_min) fail("synth: empty patch count range");
  if (!(patch_side_min > 0) || patch_side_max < patch_side_min) fail("synth: empty patch size range");
  if (!(reflectance_min >= 0) || reflectance_max <= reflectance_min) fail("synth: empty reflectance range");
  if (achromatic_patch && achromatic_max <= achromatic_min) fail("synth: empty achromatic range");
  if (achromatic_prob < 0 || achromatic_prob > 1) fail("synth: achromatic probability outside [0,1]");
  if (achromatic_patch && (!(achromatic_side_min > 0) || achromatic_side_max < achromatic_side_min)) {
    fail("synth: empty achromatic patch size range");
  }
  if (!(illum_rg_max > illum_rg_min) || !(illum_bg_max > illum_bg_min)) {
    fail("synth: degenerate illuminant chromaticity box");
  }
  if (!(exposure_min > 0) || exposure_max < exposure_min) fail("synth: empty exposure range");
  if (noise_std < 0) fail("synth: negative noise level");
  if (noise_std_max != 0.0 && noise_std_max < noise_std) fail("synth: empty noise range");
  for (double t : {tint_r, tint_g, tint_b}) {
    if (!(t > 0)) fail("synth: tint components must be positive");
  }
}

std::vector<SynthSample> synthesize(const SynthConfig& config, int n) {
  config.validate();
  if (n < 1) fail("synth: sample count must be >= 1");

  std::vector<SynthSample> out;
  out.reserve(std::size_t(n));
  const double tint[3] = {config.tint_r, config.tint_g, config.tint_b};

  for (int idx = 0; idx < n; ++idx) {
    std::mt19937_64 rng(mix64(config.seed ^ mix64(0x5343454eull + std::uint64_t(idx))));
    const int s = config.size;
    LinearImage refl(s, s);

    auto chromatic = [&](double rgb[3]) {
      for (int c = 0; c < 3; ++c) {
        rgb[c] = clamp01(uniform_in(rng, config.reflectance_min, config.reflectance_max) * tint[c]);
      }
    };
    auto rand_rect = [&](int& x0, int& y0, int& w, int& h) {
      x0 = int(uniform01(rng) * s);
      y0 = int(uniform01(rng) * s);
      w = std::max(1, int(uniform_in(rng, config.patch_side_min, config.patch_side_max) * s));
      h = std::max(1, int(uniform_in(rng, config.patch_side_min, config.patch_side_max) * s));
    };

    double rgb[3];
    chromatic(rgb);
    paint_rect(refl, 0, 0, s, s, rgb);
    const int patches = config.patches_min + int(uniform01(rng) * (config.patches_max - config.patches_min + 1));
    for (int p = 0; p < patches; ++p) {
      int x0, y0, w, h;
      rand_rect(x0, y0, w, h);
      chromatic(rgb);
      paint_rect(refl, x0, y0, w, h, rgb);
    }
    if (config.achromatic_patch && uniform01(rng) < config.achromatic_prob) {
      const int x0 = int(uniform01(rng) * s);
      const int y0 = int(uniform01(rng) * s);
      const int w = std::max(1, int(uniform_in(rng, config.achromatic_side_min, config.achromatic_side_max) * s));
      const int h = std::max(1, int(uniform_in(rng, config.achromatic_side_min, config.achromatic_side_max) * s));
      const double u = uniform_in(rng, config.achromatic_min, config.achromatic_max);
      const double grey[3] = {u, u, u};
      paint_rect(refl, x0, y0, w, h, grey);
    }
    if (config.enforce_grey_mean) {
      double mean[3] = {0, 0, 0};
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c) mean[c] += refl.at(y, x, c);
      const double target = (mean[0] + mean[1] + mean[2]) / 3.0;
      double peak = 0.0;
      for (int c = 0; c < 3; ++c) {
        if (!(mean[c] > 0)) fail("synth: cannot grey-balance an all-black channel");
      }
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c) {
            const double v = refl.at(y, x, c) * target / mean[c];
            refl.at(y, x, c) = float(v);
            peak = std::max(peak, v);
          }
      if (peak > 1.0) {  // uniform rescale keeps the channel means equal
        for (auto& v : refl.pixels) v = float(v / peak);
      }
    }

    // Illuminant from the chromaticity box, green anchored then normalized.
    const double rg = uniform_in(rng, config.illum_rg_min, config.illum_rg_max);
    const double bg = uniform_in(rng, config.illum_bg_min, config.illum_bg_max);
    const Illuminant gt = Illuminant{rg, 1.0, bg}.normalized();

    const double gain = config.exposure_max > config.exposure_min
                            ? uniform_in(rng, config.exposure_min, config.exposure_max)
                            : config.exposure_min;
    const double sigma = config.noise_std_max > config.noise_std
                             ? uniform_in(rng, config.noise_std, config.noise_std_max)
                             : config.noise_std;
    LinearImage img(s, s);
    const double e[3] = {gt.r, gt.g, gt.b};
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        for (int c = 0; c < 3; ++c) {
          double v = refl.at(y, x, c) * e[c] * gain;
          if (sigma > 0) v += gauss01(rng) * sigma;
          v = std::max(0.0, v);
          if (config.clip) v = std::min(1.0, v);
          img.at(y, x, c) = float(v);
        }
      }
    }
    out.push_back(SynthSample{std::move(img), gt, std::move(refl)});
  }
  return out;
}

std::vector<Sample> load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) fail("manifest: cannot open " + manifest_path.string());
  std::string line;
  if (!std::getline(f, line)) fail("manifest: empty file " + manifest_path.string());
  if (split_csv_row(line) != std::vector<std::string>{"path", "e_r", "e_g", "e_b", "fold"}) {
    fail("manifest: bad header in " + manifest_path.string());
  }
  std::vector<Sample> samples;
  const auto base = manifest_path.parent_path();
  std::size_t row = 0;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    const std::string where = "manifest: row " + std::to_string(row) + " of " + manifest_path.string();
    if (fields.size() != 5) fail(where + ": expected 5 fields, got " + std::to_string(fields.size()));
    Sample s;
    s.path = fields[0];
    if (s.path.empty()) fail(where + ": empty path");
    if (!parse_double(fields[1], s.gt.r) || !parse_double(fields[2], s.gt.g) || !parse_double(fields[3], s.gt.b)) {
      fail(where + ": malformed illuminant");
    }
    if (!parse_int(fields[4], s.fold) || s.fold < 0) fail(where + ": malformed fold");
    try {
      s.gt.validate();
    } catch (const Error& e) {
      fail(where + ": " + e.what());
    }
    if (!std::filesystem::exists(base / s.path)) fail(where + ": missing image file " + (base / s.path).string());
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_manifest(const std::vector<Sample>& samples, const std::filesystem::path& manifest_path) {
  std::ofstream f(manifest_path, std::ios::trunc);
  if (!f) fail("manifest: cannot write " + manifest_path.string());
  f << "path,e_r,e_g,e_b,fold\n";
  for (const auto& s : samples) {
    s.gt.validate("manifest: illuminant");
    if (s.fold < 0) fail("manifest: negative fold");
    f << s.path << ',' << format_double(s.gt.r) << ',' << format_double(s.gt.g) << ',' << format_double(s.gt.b)
      << ',' << s.fold << '\n';
  }
  if (!f) fail("manifest: short write to " + manifest_path.string());
}

std::filesystem::path sample_image_path(const std::filesystem::path& manifest_path, const Sample& sample) {
  return manifest_path.parent_path() / sample.path;
}

std::vector<FoldSplit> cross_validation_splits(const std::vector<Sample>& samples, int folds) {
  if (folds < 2) fail("splits: need at least two folds");
  std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int f = samples[i].fold;
    if (f < 0 || f >= folds) {
      fail("splits: sample " + std::to_string(i) + " has fold " + std::to_string(f) + " outside [0," +
           std::to_string(folds) + ")");
    }
  }
  for (int k = 0; k < folds; ++k) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      (samples[i].fold == k ? out[std::size_t(k)].test : out[std::size_t(k)].train).push_back(i);
    }
    if (out[std::size_t(k)].test.empty()) fail("splits: fold " + std::to_string(k) + " is empty");
  }
  return out;
}

}  // namespace cwcc
