/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include <cmath>
#include <random>

#include "cwcc/baselines.hpp"
#include "cwcc/dataset.hpp"
#include "cwcc/metrics.hpp"

using namespace cwcc;

namespace {

LinearImage random_image(int h, int w, std::mt19937_64& rng, double lo = 0.05, double hi = 0.8) {
  LinearImage img(h, w);
  for (auto& v : img.pixels) v = float(uniform_in(rng, lo, hi));
  return img;
}

LinearImage apply_illuminant(const LinearImage& r, const Illuminant& e) {
  LinearImage out(r.height, r.width);
  const double ec[3] = {e.r, e.g, e.b};
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = float(r.at(y, x, c) * ec[c]);
  return out;
}

}  // namespace

TEST_CASE("grey_world recovers channel-mean ratios") {
  LinearImage img(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      img.at(y, x, 0) = 0.5f;
      img.at(y, x, 1) = 0.25f;
      img.at(y, x, 2) = 0.25f;
    }
  const auto e = grey_world(img);
  const double s = std::sqrt(6.0);
  CHECK(e.r == doctest::Approx(2.0 / s));
  CHECK(e.g == doctest::Approx(1.0 / s));
  CHECK(e.b == doctest::Approx(1.0 / s));

  LinearImage neutral(3, 3);
  for (auto& v : neutral.pixels) v = 0.4f;
  const auto n = grey_world(neutral);
  CHECK(recovery_error({1, 1, 1}, n) < 1e-9);

  CHECK_THROWS_AS(grey_world(LinearImage(4, 4)), Error);  // all black
}

TEST_CASE("grey_world nails grey-mean synthetic scenes") {
  SynthConfig cfg;
  cfg.size = 48;
  cfg.enforce_grey_mean = true;
  cfg.seed = 99;
  const auto scenes = synthesize(cfg, 10);
  for (const auto& s : scenes) {
    CHECK(recovery_error(s.gt, grey_world(s.image)) < 0.5);
  }
}

TEST_CASE("white_patch picks the brightest patch") {
  std::mt19937_64 rng(5);
  const Illuminant e = Illuminant{0.9, 1.0, 0.6}.normalized();
  auto img = random_image(8, 8, rng, 0.05, 0.7);
  auto lit = apply_illuminant(img, e);
  // plant one pixel exactly at e, brighter than everything else per channel
  lit.at(3, 4, 0) = float(e.r);
  lit.at(3, 4, 1) = float(e.g);
  lit.at(3, 4, 2) = float(e.b);
  CHECK(recovery_error(e, white_patch(lit)) < 1e-3);

  LinearImage constant(4, 4);
  for (auto& v : constant.pixels) v = 0.5f;
  CHECK(recovery_error({1, 1, 1}, white_patch(constant)) < 1e-9);
}

TEST_CASE("white_patch saturation policy") {
  LinearImage img(2, 2);
  for (auto& v : img.pixels) v = 0.3f;
  img.at(0, 0, 0) = 1.0f;  // clipped pixel must be ignored by default
  img.at(1, 1, 1) = 0.6f;
  const auto e = white_patch(img);
  CHECK(e.r == doctest::Approx(0.3 / std::sqrt(0.3 * 0.3 + 0.6 * 0.6 + 0.3 * 0.3)));
  const auto keep = white_patch(img, SaturationPolicy{false, 1.0});
  CHECK(keep.r > e.r);

  LinearImage all_sat(2, 2);
  for (auto& v : all_sat.pixels) v = 1.0f;
  CHECK_THROWS_AS(white_patch(all_sat), Error);
}

TEST_CASE("shades_of_grey limits") {
  std::mt19937_64 rng(7);
  const auto img = random_image(10, 10, rng);

  SUBCASE("p=1 collapses to grey_world") {
    CHECK(recovery_error(shades_of_grey(img, 1.0), grey_world(img)) < 1e-9);
  }
  SUBCASE("large p approaches white_patch") {
    CHECK(recovery_error(shades_of_grey(img, 1e6), white_patch(img)) < 0.01);
  }
  SUBCASE("p=2 matches the hand-computed RMS on a 2x2 image") {
    LinearImage tiny(2, 2);
    const float vals[4][3] = {{0.1f, 0.4f, 0.2f}, {0.3f, 0.2f, 0.6f}, {0.5f, 0.1f, 0.4f}, {0.2f, 0.3f, 0.1f}};
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c) tiny.at(i / 2, i % 2, c) = vals[i][c];
    double rms[3] = {0, 0, 0};
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c) rms[c] += double(vals[i][c]) * vals[i][c];
    for (auto& v : rms) v = std::sqrt(v / 4.0);
    const auto got = shades_of_grey(tiny, 2.0);
    const double n = std::sqrt(rms[0] * rms[0] + rms[1] * rms[1] + rms[2] * rms[2]);
    CHECK(got.r == doctest::Approx(rms[0] / n).epsilon(1e-9));
    CHECK(got.g == doctest::Approx(rms[1] / n).epsilon(1e-9));
    CHECK(got.b == doctest::Approx(rms[2] / n).epsilon(1e-9));
  }
  SUBCASE("p below 1 is rejected") {
    CHECK_THROWS_AS(shades_of_grey(img, 0.5), Error);
  }
}

TEST_CASE("grey_edge contracts") {
  SUBCASE("constant image has no edges and is rejected") {
    LinearImage constant(8, 8);
    for (auto& v : constant.pixels) v = 0.5f;
    CHECK_THROWS_AS(grey_edge(constant, 1, 6.0, 0.0), Error);
  }
  SUBCASE("separable channel scaling is recovered") {
    const Illuminant e = Illuminant{1.2, 1.0, 0.7}.normalized();
    LinearImage pattern(12, 12);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        const double g = 0.5 + 0.3 * std::sin(0.7 * x) * std::sin(0.5 * y);
        for (int c = 0; c < 3; ++c) pattern.at(y, x, c) = float(g);
      }
    const auto lit = apply_illuminant(pattern, e);
    CHECK(recovery_error(e, grey_edge(lit, 1, 6.0, 0.0)) < 0.1);
    CHECK(recovery_error(e, grey_edge(lit, 2, 6.0, 0.0)) < 0.1);
  }
  SUBCASE("5x5 ramp matches hand-computed central differences") {
    LinearImage ramp(5, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        ramp.at(y, x, 0) = float(0.1 * x);
        ramp.at(y, x, 1) = float(0.05 * x);
        ramp.at(y, x, 2) = float(0.02 * x);
      }
    // per channel: dy = 0, dx = slope everywhere except the replicated
    // borders where it is slope/2; p=1 mean = slope * (3 + 2*0.5)/5
    const double mean_factor = (3.0 + 2.0 * 0.5) / 5.0;
    const double m[3] = {0.1 * mean_factor, 0.05 * mean_factor, 0.02 * mean_factor};
    const double n = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
    const auto got = grey_edge(ramp, 1, 1.0, 0.0);
    CHECK(got.r == doctest::Approx(m[0] / n).epsilon(1e-6));
    CHECK(got.g == doctest::Approx(m[1] / n).epsilon(1e-6));
    CHECK(got.b == doctest::Approx(m[2] / n).epsilon(1e-6));
  }
  SUBCASE("images smaller than the stencil are rejected") {
    LinearImage tiny(2, 2);
    for (auto& v : tiny.pixels) v = 0.3f;
    CHECK_THROWS_AS(grey_edge(tiny, 1, 6.0, 0.0), Error);
    LinearImage small(8, 8);
    for (auto& v : small.pixels) v = 0.3f;
    CHECK_THROWS_AS(grey_edge(small, 1, 6.0, 2.0), Error);  // 13-tap Gaussian
  }
  SUBCASE("derivative order outside {1,2} is rejected") {
    LinearImage img(8, 8);
    for (auto& v : img.pixels) v = 0.3f;
    CHECK_THROWS_AS(grey_edge(img, 3, 6.0, 0.0), Error);
  }
}

TEST_CASE("baseline estimates are exposure invariant and von-Kries consistent") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = random_image(9, 9, rng, 0.05, 0.6);
    const Illuminant e =
        Illuminant{uniform_in(rng, 0.6, 1.4), 1.0, uniform_in(rng, 0.6, 1.4)}.normalized();
    const auto lit = apply_illuminant(r, e);

    auto check_method = [&](auto&& fn) {
      const Illuminant base = fn(r);
      const Illuminant on_lit = fn(lit);
      // exposure invariance; tolerances sit above float pixel quantization
      LinearImage scaled = lit;
      for (auto& v : scaled.pixels) v *= 0.37f;
      CHECK(recovery_error(on_lit, fn(scaled)) < 5e-4);
      // per-channel homogeneity: estimates transform with the illuminant
      const Illuminant expect{base.r * e.r, base.g * e.g, base.b * e.b};
      CHECK(recovery_error(expect, on_lit) < 5e-4);
      CHECK(on_lit.r > 0);
      CHECK(on_lit.g > 0);
      CHECK(on_lit.b > 0);
    };
    check_method([](const LinearImage& i) { return grey_world(i); });
    check_method([](const LinearImage& i) { return white_patch(i); });
    check_method([](const LinearImage& i) { return shades_of_grey(i, 6.0); });
    check_method([](const LinearImage& i) { return grey_edge(i, 1, 6.0, 0.0); });
  }
}
