/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cwcc/checkpoint.hpp"
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

LinearImage synth_one(int size, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.size = size;
  cfg.seed = seed;
  return synthesize(cfg, 1)[0].image;
}

std::vector<LabeledImage> synth_set(int size, int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.size = size;
  cfg.seed = seed;
  std::vector<LabeledImage> out;
  for (auto& s : synthesize(cfg, n)) out.push_back(LabeledImage{std::move(s.image), s.gt});
  return out;
}

LinearImage swap_rb(const LinearImage& img) {
  LinearImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      out.at(y, x, 0) = img.at(y, x, 2);
      out.at(y, x, 2) = img.at(y, x, 0);
    }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  CwccConfig bad;
  bad.input_size = 20;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.input_size = 31;
  CHECK_THROWS_AS(bad.validate(), Error);
  CwccConfig ok;
  ok.input_size = 40;
  ok.validate();
}

TEST_CASE("forward contract: positive unit-norm estimate, size and pixel checks") {
  CwccConfig cfg;
  cfg.input_size = 32;
  const CwccModel model(cfg, 7);
  const auto img = synth_one(32, 5);
  const auto e = model.forward(img);
  CHECK(e.r > 0);
  CHECK(e.g > 0);
  CHECK(e.b > 0);
  CHECK(std::abs(e.norm() - 1.0) < 1e-6);

  CHECK_THROWS_WITH_AS(model.forward(synth_one(64, 5)), doctest::Contains("resize"), Error);
  LinearImage nan_img = img;
  nan_img.pixels[10] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(model.forward(nan_img), Error);
  LinearImage big = img;
  big.pixels[3] = 1.5f;
  CHECK_THROWS_AS(model.forward(big), Error);
}

TEST_CASE("forward is deterministic for a fixed seed and input") {
  CwccConfig cfg;
  cfg.input_size = 32;
  const auto img = synth_one(32, 9);
  const CwccModel a(cfg, 42);
  const CwccModel b(cfg, 42);
  const auto ea = a.forward(img), eb = b.forward(img);
  CHECK(ea.r == eb.r);
  CHECK(ea.g == eb.g);
  CHECK(ea.b == eb.b);
  const auto again = a.forward(img);
  CHECK(ea.r == again.r);
}

TEST_CASE("channel-swap symmetry: shared weights permute the pre-concat features") {
  CwccConfig cfg;
  cfg.input_size = 32;
  const CwccModel model(cfg, 3);
  const auto img = synth_one(32, 17);
  const auto swapped = swap_rb(img);

  const auto base = model.forward_batch({&img}, false, nullptr);
  const auto perm = model.forward_batch({&swapped}, false, nullptr);
  REQUIRE(base.features[0].shape() == perm.features[2].shape());
  double max_diff = 0;
  for (std::size_t i = 0; i < base.features[0].data().size(); ++i) {
    max_diff = std::max(max_diff, double(std::abs(base.features[0].data()[i] - perm.features[2].data()[i])));
    max_diff = std::max(max_diff, double(std::abs(base.features[2].data()[i] - perm.features[0].data()[i])));
    max_diff = std::max(max_diff, double(std::abs(base.features[1].data()[i] - perm.features[1].data()[i])));
  }
  CHECK(max_diff <= 1e-6);
}

TEST_CASE("disjoint block applied standalone equals the in-model features") {
  CwccConfig cfg;
  cfg.input_size = 32;
  const CwccModel model(cfg, 11);
  const auto img = synth_one(32, 23);
  const auto acts = model.forward_batch({&img}, false, nullptr);
  // rebuild the red plane and run the extractor on its own
  std::vector<float> plane(32 * 32);
  for (int i = 0; i < 32 * 32; ++i) plane[std::size_t(i)] = img.pixels[std::size_t(i) * 3];
  const auto standalone = model.apply_disjoint(TensorF::from_data({1, 1, 32, 32}, plane), 0);
  REQUIRE(standalone.shape() == acts.features[0].shape());
  for (std::size_t i = 0; i < standalone.data().size(); ++i) {
    CHECK(standalone.data()[i] == acts.features[0].data()[i]);
  }
}

TEST_CASE("parameter counts match the architecture") {
  CwccConfig cfg;
  const CwccModel shared(cfg, 1);
  CHECK(shared.count_parameters() >= 140000);
  CHECK(shared.count_parameters() <= 170000);

  // merging block alone: 384*40+40 + 40*3+3
  std::int64_t merge = 0;
  for (const auto& [name, t] : shared.named_parameters()) {
    if (name.rfind("merge/", 0) == 0) merge += t.size();
  }
  CHECK(merge == 15523);

  cfg.variant = Variant::per_channel;
  const CwccModel per_ch(cfg, 1);
  CHECK(per_ch.disjoint_parameter_count() == 3 * shared.disjoint_parameter_count());
  CHECK(per_ch.count_parameters() == shared.count_parameters() + 2 * shared.disjoint_parameter_count());
}

TEST_CASE("per-channel variant starts identical to the shared variant") {
  CwccConfig cfg;
  cfg.input_size = 32;
  cfg.dropout_rate = 0.0f;
  const CwccModel shared(cfg, 77);
  cfg.variant = Variant::per_channel;
  const CwccModel per_ch(cfg, 77);
  const auto img = synth_one(32, 31);
  const auto a = shared.forward(img);
  const auto b = per_ch.forward(img);
  CHECK(a.r == b.r);
  CHECK(a.g == b.g);
  CHECK(a.b == b.b);
}

TEST_CASE("train: degenerate and error cases") {
  CwccConfig cfg;
  cfg.input_size = 32;
  auto set = synth_set(32, 8, 5);
  const std::vector<LabeledImage> val(set.begin() + 6, set.end());
  const std::vector<LabeledImage> tr(set.begin(), set.begin() + 6);

  SUBCASE("lr = 0 leaves parameters unchanged") {
    CwccModel model(cfg, 2);
    const auto before = model.parameter_hash();
    train(model, tr, val, TrainHyper{2, 4, 0.0}, 1);
    CHECK(model.parameter_hash() == before);
  }
  SUBCASE("identical seeds give identical logs") {
    CwccModel m1(cfg, 2), m2(cfg, 2);
    const auto r1 = train(m1, tr, val, TrainHyper{2, 4, 1e-3}, 9);
    const auto r2 = train(m2, tr, val, TrainHyper{2, 4, 1e-3}, 9);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
      CHECK(r1.log[i].train_err_deg == r2.log[i].train_err_deg);
      CHECK(r1.log[i].val_err_deg == r2.log[i].val_err_deg);
    }
    CHECK(m1.parameter_hash() == m2.parameter_hash());
  }
  SUBCASE("empty sets are rejected") {
    CwccModel model(cfg, 2);
    CHECK_THROWS_AS(train(model, {}, val, TrainHyper{1, 4, 1e-3}, 1), Error);
    CHECK_THROWS_AS(train(model, tr, {}, TrainHyper{1, 4, 1e-3}, 1), Error);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto dir = temp_dir("checkpoint");
  CwccConfig cfg;
  cfg.input_size = 32;
  const CwccModel model(cfg, 55);
  const auto path = dir / "m.bin";
  save_checkpoint(model, path, CheckpointMeta{55, 4});
  const auto loaded = load_checkpoint(path);

  CHECK(loaded.meta.seed == 55);
  CHECK(loaded.meta.epoch == 4);
  CHECK(loaded.model.count_parameters() == model.count_parameters());
  CHECK(loaded.model.parameter_hash() == model.parameter_hash());
  const auto orig = model.named_parameters();
  const auto back = loaded.model.named_parameters();
  REQUIRE(orig.size() == back.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CHECK(orig[i].first == back[i].first);
    const auto a = orig[i].second.data();
    const auto b = back[i].second.data();
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(a[j] == b[j]);
  }

  const auto img = synth_one(32, 61);
  const auto ea = model.forward(img);
  const auto eb = loaded.model.forward(img);
  CHECK(ea.r == eb.r);
  CHECK(ea.g == eb.g);
  CHECK(ea.b == eb.b);

  SUBCASE("saving twice gives identical bytes") {
    save_checkpoint(model, dir / "m2.bin", CheckpointMeta{55, 4});
    std::ifstream f1(path, std::ios::binary), f2(dir / "m2.bin", std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }
}

TEST_CASE("checkpoint corruption diagnostics") {
  const auto dir = temp_dir("checkpoint_bad");
  CwccConfig cfg;
  cfg.input_size = 32;
  const CwccModel model(cfg, 5);
  const auto path = dir / "m.bin";
  save_checkpoint(model, path);
  std::ifstream f(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  SUBCASE("truncated file") {
    std::ofstream o(dir / "t.bin", std::ios::binary);
    o.write(bytes.data(), long(bytes.size() / 2));
    o.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "t.bin"), doctest::Contains("truncated"), Error);
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[1] = 'Z';
    std::ofstream o(dir / "m2.bin", std::ios::binary);
    o.write(b.data(), long(b.size()));
    o.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "m2.bin"), doctest::Contains("magic"), Error);
  }
  SUBCASE("flipped payload byte fails the CRC") {
    std::string b = bytes;
    b[100] = char(b[100] ^ 0x01);
    std::ofstream o(dir / "c.bin", std::ios::binary);
    o.write(b.data(), long(b.size()));
    o.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "c.bin"), doctest::Contains("CRC"), Error);
  }
}

TEST_CASE("correct_image semantics") {
  const auto img = synth_one(32, 3);

  SUBCASE("neutral illuminant only rescales globally") {
    const double s = 1.0 / std::sqrt(3.0);
    const auto corrected = correct_image(img, {s, s, s});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(std::abs(double(corrected.pixels[i]) - double(img.pixels[i])) < 1e-6);
    }
  }
  SUBCASE("estimate scale does not matter") {
    const Illuminant e{0.8, 1.1, 0.9};
    const Illuminant e2{1.6, 2.2, 1.8};
    const auto a = correct_image(img, e);
    const auto b = correct_image(img, e2);
    CHECK(a.pixels == b.pixels);
  }
  SUBCASE("non-positive components are rejected") {
    CHECK_THROWS_AS(correct_image(img, {1.0, 0.0, 1.0}), Error);
    CHECK_THROWS_AS(correct_image(img, {1.0, -0.5, 1.0}), Error);
  }
}
