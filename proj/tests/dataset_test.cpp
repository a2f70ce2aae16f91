/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cwcc/dataset.hpp"
#include "cwcc/model.hpp"

using namespace cwcc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / "cwcc_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthesize is deterministic and exactly invertible without noise") {
  SynthConfig cfg;
  cfg.size = 32;
  cfg.seed = 42;
  cfg.noise_std = 0.0;
  cfg.clip = false;
  const auto a = synthesize(cfg, 5);
  const auto b = synthesize(cfg, 5);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.pixels == b[i].image.pixels);  // bit-exact determinism
    CHECK(a[i].gt.r == b[i].gt.r);

    // I = R o e inverts back to R up to the global green factor
    const auto corrected = correct_image(a[i].image, a[i].gt);
    const double scale = a[i].gt.g;
    for (std::size_t p = 0; p < corrected.pixels.size(); ++p) {
      CHECK(std::abs(double(corrected.pixels[p]) - double(a[i].reflectance.pixels[p]) * scale) < 1e-6);
    }
  }
}

TEST_CASE("synthesize under a neutral illuminant returns the scaled reflectance") {
  SynthConfig cfg;
  cfg.size = 16;
  cfg.seed = 3;
  cfg.illum_rg_min = 1.0 - 1e-12;
  cfg.illum_rg_max = 1.0 + 1e-12;
  cfg.illum_bg_min = 1.0 - 1e-12;
  cfg.illum_bg_max = 1.0 + 1e-12;
  const auto s = synthesize(cfg, 2);
  const double scale = 1.0 / std::sqrt(3.0);
  for (const auto& sample : s) {
    for (std::size_t p = 0; p < sample.image.pixels.size(); ++p) {
      CHECK(std::abs(double(sample.image.pixels[p]) - double(sample.reflectance.pixels[p]) * scale) < 1e-6);
    }
  }
}

TEST_CASE("drawn illuminant chromaticities fill the configured box") {
  SynthConfig cfg;
  cfg.size = 8;
  cfg.patches_min = 1;
  cfg.patches_max = 2;
  cfg.seed = 1234;
  const int n = 10000;
  const auto samples = synthesize(cfg, n);
  double mean_rg = 0, mean_bg = 0;
  for (const auto& s : samples) {
    mean_rg += s.gt.r / s.gt.g;
    mean_bg += s.gt.b / s.gt.g;
  }
  mean_rg /= n;
  mean_bg /= n;
  // uniform draws: center 1.0, se = (0.8/sqrt(12))/sqrt(n)
  const double se = (0.8 / std::sqrt(12.0)) / std::sqrt(double(n));
  CHECK(std::abs(mean_rg - 1.0) < 3 * se);
  CHECK(std::abs(mean_bg - 1.0) < 3 * se);
  for (const auto& s : samples) s.gt.validate();
}

TEST_CASE("degenerate chromaticity boxes are rejected") {
  SynthConfig cfg;
  cfg.illum_rg_min = 1.0;
  cfg.illum_rg_max = 1.0;
  CHECK_THROWS_AS(synthesize(cfg, 1), Error);
  SynthConfig cfg2;
  CHECK_THROWS_AS(synthesize(cfg2, 0), Error);
}

TEST_CASE("manifest round trip and row validation") {
  const auto dir = temp_dir("manifest");
  SynthConfig cfg;
  cfg.size = 8;
  cfg.seed = 9;
  const auto scenes = synthesize(cfg, 50);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string name = "img" + std::to_string(i) + ".rif";
    write_image(scenes[i].image, dir / name);
    samples.push_back(Sample{name, scenes[i].gt, int(i % 10)});
  }
  write_manifest(samples, dir / "manifest.csv");
  const auto loaded = load_manifest(dir / "manifest.csv");
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].path == samples[i].path);
    CHECK(loaded[i].fold == samples[i].fold);
    CHECK(loaded[i].gt.r == samples[i].gt.r);  // to_chars round trip is exact
    CHECK(loaded[i].gt.g == samples[i].gt.g);
    CHECK(loaded[i].gt.b == samples[i].gt.b);
  }

  SUBCASE("non-positive illuminant rows are rejected with their row index") {
    std::ofstream f(dir / "bad.csv");
    f << "path,e_r,e_g,e_b,fold\n";
    f << samples[0].path << ",0.5,0.5,0.5,0\n";
    f << samples[1].path << ",0,0.5,0.5,1\n";
    f.close();
    CHECK_THROWS_WITH_AS(load_manifest(dir / "bad.csv"), doctest::Contains("row 2"), Error);
  }
  SUBCASE("missing image files are rejected") {
    std::ofstream f(dir / "missing.csv");
    f << "path,e_r,e_g,e_b,fold\n";
    f << "nope.rif,0.5,0.5,0.5,0\n";
    f.close();
    CHECK_THROWS_WITH_AS(load_manifest(dir / "missing.csv"), doctest::Contains("missing image"), Error);
  }
  SUBCASE("malformed rows are rejected") {
    std::ofstream f(dir / "short.csv");
    f << "path,e_r,e_g,e_b,fold\n";
    f << samples[0].path << ",0.5,0.5\n";
    f.close();
    CHECK_THROWS_WITH_AS(load_manifest(dir / "short.csv"), doctest::Contains("expected 5 fields"), Error);
  }
  SUBCASE("bad headers are rejected") {
    std::ofstream f(dir / "hdr.csv");
    f << "path,r,g,b,fold\n";
    f.close();
    CHECK_THROWS_AS(load_manifest(dir / "hdr.csv"), Error);
  }
}

TEST_CASE("a 7022-row manifest reproduces the expected fold histogram") {
  const auto dir = temp_dir("big_manifest");
  SynthConfig cfg;
  cfg.size = 8;
  cfg.seed = 4;
  const auto scenes = synthesize(cfg, 10);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    write_image(scenes[i].image, dir / ("img" + std::to_string(i) + ".rif"));
  }
  std::vector<Sample> rows;
  rows.reserve(7022);
  for (int i = 0; i < 7022; ++i) {
    rows.push_back(Sample{"img" + std::to_string(i % 10) + ".rif", {0.5, 0.6, 0.4}, i % 10});
  }
  write_manifest(rows, dir / "manifest.csv");
  const auto loaded = load_manifest(dir / "manifest.csv");
  REQUIRE(loaded.size() == 7022);

  // independent oracle: count fold tags straight off the CSV text
  const std::string text = slurp(dir / "manifest.csv");
  std::array<int, 10> line_counts{};
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string line = text.substr(pos, eol - pos);
    pos = (eol == std::string::npos) ? text.size() : eol + 1;
    if (first || line.empty()) {
      first = false;
      continue;
    }
    ++line_counts[std::size_t(line.back() - '0')];
  }
  std::array<int, 10> hist{};
  for (const auto& s : loaded) ++hist[std::size_t(s.fold)];
  for (int f = 0; f < 10; ++f) {
    CHECK(hist[std::size_t(f)] == line_counts[std::size_t(f)]);
    CHECK(hist[std::size_t(f)] >= 702);
  }
}

TEST_CASE("cross-validation splits partition the data") {
  std::vector<Sample> four(4);
  for (int i = 0; i < 4; ++i) four[std::size_t(i)] = Sample{"x", {1, 1, 1}, i / 2};
  const auto splits = cross_validation_splits(four, 2);
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].test == std::vector<std::size_t>{0, 1});
  CHECK(splits[0].train == std::vector<std::size_t>{2, 3});
  CHECK(splits[1].test == std::vector<std::size_t>{2, 3});

  SUBCASE("random fold assignments cover and never overlap") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int F = 2 + int(rng() % 6);
      const int n = F + int(rng() % 40);
      std::vector<Sample> samples;
      for (int i = 0; i < n; ++i) {
        samples.push_back(Sample{"x", {1, 1, 1}, i < F ? i : int(rng() % F)});
      }
      const auto sp = cross_validation_splits(samples, F);
      std::vector<int> seen(std::size_t(n), 0);
      for (int k = 0; k < F; ++k) {
        for (auto i : sp[std::size_t(k)].test) ++seen[i];
        std::vector<int> in_train(std::size_t(n), 0);
        for (auto i : sp[std::size_t(k)].train) in_train[i] = 1;
        for (auto i : sp[std::size_t(k)].test) CHECK(in_train[i] == 0);
        CHECK(sp[std::size_t(k)].train.size() + sp[std::size_t(k)].test.size() == std::size_t(n));
      }
      for (int c : seen) CHECK(c == 1);  // union of test folds is everything, exactly once
    }
  }
  SUBCASE("empty folds are rejected") {
    std::vector<Sample> s{{"x", {1, 1, 1}, 0}, {"x", {1, 1, 1}, 2}};
    CHECK_THROWS_WITH_AS(cross_validation_splits(s, 3), doctest::Contains("fold 1"), Error);
  }
  SUBCASE("out-of-range folds are rejected") {
    std::vector<Sample> s{{"x", {1, 1, 1}, 0}, {"x", {1, 1, 1}, 5}};
    CHECK_THROWS_AS(cross_validation_splits(s, 2), Error);
  }
}

TEST_CASE("RIF image round trips are bit-exact and corruption is rejected") {
  const auto dir = temp_dir("rif");
  SynthConfig cfg;
  cfg.size = 16;
  cfg.seed = 21;
  const auto scene = synthesize(cfg, 1)[0];
  const auto path = dir / "a.rif";
  write_image(scene.image, path);
  const auto back = read_image(path);
  CHECK(back.pixels == scene.image.pixels);
  CHECK(back.height == scene.image.height);

  LinearImage zeros(4, 4);
  write_image(zeros, dir / "z.rif");
  const auto z = read_image(dir / "z.rif");
  for (float v : z.pixels) CHECK(v == 0.0f);

  SUBCASE("truncation") {
    auto bytes = slurp(path);
    std::ofstream f(dir / "t.rif", std::ios::binary);
    f.write(bytes.data(), long(bytes.size()) - 7);
    f.close();
    CHECK_THROWS_AS(read_image(dir / "t.rif"), Error);
  }
  SUBCASE("bad magic") {
    auto bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream f(dir / "m.rif", std::ios::binary);
    f.write(bytes.data(), long(bytes.size()));
    f.close();
    CHECK_THROWS_WITH_AS(read_image(dir / "m.rif"), doctest::Contains("magic"), Error);
  }
  SUBCASE("payload corruption is caught by the CRC") {
    auto bytes = slurp(path);
    bytes[40] = char(bytes[40] ^ 0x20);
    std::ofstream f(dir / "c.rif", std::ios::binary);
    f.write(bytes.data(), long(bytes.size()));
    f.close();
    CHECK_THROWS_WITH_AS(read_image(dir / "c.rif"), doctest::Contains("CRC"), Error);
  }
}

TEST_CASE("a written and re-read image drives forward() to the same estimate") {
  const auto dir = temp_dir("roundtrip_forward");
  SynthConfig cfg;
  cfg.size = 32;
  cfg.seed = 77;
  const auto scene = synthesize(cfg, 1)[0];
  CwccConfig mc;
  mc.input_size = 32;
  const CwccModel model(mc, 123);
  const auto direct = model.forward(scene.image);
  write_image(scene.image, dir / "x.rif");
  const auto again = model.forward(read_image(dir / "x.rif"));
  CHECK(std::abs(direct.r - again.r) < 1e-6);
  CHECK(std::abs(direct.g - again.g) < 1e-6);
  CHECK(std::abs(direct.b - again.b) < 1e-6);
}

TEST_CASE("bilinear resize basics") {
  LinearImage c(5, 7);
  for (auto& v : c.pixels) v = 0.42f;
  const auto r = resize_bilinear(c, 3, 3);
  for (float v : r.pixels) CHECK(v == doctest::Approx(0.42f));
  const auto same = resize_bilinear(c, 5, 7);
  CHECK(same.pixels == c.pixels);
  CHECK_THROWS_AS(resize_bilinear(c, 0, 3), Error);
}
