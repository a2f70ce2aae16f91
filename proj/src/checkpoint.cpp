/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cwcc {

namespace {

constexpr char kMagic[4] = {'C', 'W', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::size_t remaining() const { return bytes_.size() - off_; }

  const unsigned char* take(std::size_t n) {
    if (remaining() < n) fail("checkpoint: truncated file " + what_);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + off_;
    off_ += n;
    return p;
  }

  std::uint16_t u16() {
    const auto* p = take(2);
    return std::uint16_t(p[0] | (unsigned(p[1]) << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return p[0] | (unsigned(p[1]) << 8) | (unsigned(p[2]) << 16) | (unsigned(p[3]) << 24);
  }
  std::uint8_t u8() { return *take(1); }
  float f32() { return std::bit_cast<float>(u32()); }

  std::string str(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t off_ = 0;
};

nlohmann::json config_to_json(const CwccConfig& cfg) {
  return nlohmann::json{{"variant", to_string(cfg.variant)},
                        {"input_size", cfg.input_size},
                        {"dropout_rate", double(cfg.dropout_rate)},
                        {"fire_sizes", cfg.fire_sizes},
                        {"hidden_units", cfg.hidden_units}};
}

CwccConfig config_from_json(const nlohmann::json& j) {
  CwccConfig cfg;
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.input_size = j.at("input_size").get<int>();
  cfg.dropout_rate = float(j.at("dropout_rate").get<double>());
  const auto sizes = j.at("fire_sizes").get<std::vector<int>>();
  if (sizes.size() != 4) fail("checkpoint: metadata fire_sizes must have 4 entries");
  std::copy(sizes.begin(), sizes.end(), cfg.fire_sizes.begin());
  cfg.hidden_units = j.at("hidden_units").get<int>();
  cfg.validate();
  return cfg;
}

void append_tensor(std::string& out, const std::string& name, const TensorF& t) {
  if (name.size() > 0xffff) fail("checkpoint: tensor name too long");
  if (t.shape().size() > 0xff) fail("checkpoint: tensor rank too large");
  put_u16(out, std::uint16_t(name.size()));
  out.append(name);
  out.push_back(char(t.shape().size()));
  for (int d : t.shape()) put_u32(out, std::uint32_t(d));
  for (float v : t.data()) put_f32(out, v);
}

}  // namespace

void save_checkpoint(const CwccModel& model, const std::filesystem::path& path, const CheckpointMeta& meta,
                     const UncertaintyBranch* branch) {
  auto tensors = model.named_parameters();
  if (branch != nullptr) {
    if (branch->input_units() != model.config().hidden_units) {
      fail("checkpoint: branch input units do not match the model's hidden layer");
    }
    for (auto& nt : branch->named_parameters()) tensors.push_back(nt);
  }

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, std::uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) append_tensor(out, name, t);

  nlohmann::json j = config_to_json(model.config());
  j["seed"] = meta.seed;
  j["epoch"] = meta.epoch;
  j["has_uncertainty"] = branch != nullptr;
  const std::string text = j.dump();
  put_u32(out, std::uint32_t(text.size()));
  out.append(text);
  put_u32(out, Crc32::of(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("checkpoint: cannot write " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) fail("checkpoint: short write to " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(bytes, path.string());
  const auto* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail("checkpoint: bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    fail("checkpoint: unsupported version " + std::to_string(version) + " in " + path.string());
  }
  const std::uint32_t count = r.u32();

  std::vector<std::pair<std::string, TensorF>> model_tensors;
  std::vector<std::pair<std::string, TensorF>> branch_tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) {
      const std::uint32_t v = r.u32();
      if (v == 0 || v > (1u << 24)) fail("checkpoint: bad extent in tensor '" + name + "'");
      d = int(v);
    }
    const std::int64_t n = numel(shape);
    std::vector<float> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = r.f32();
    auto t = TensorF::from_data(std::move(shape), std::move(data));
    (name.rfind("uq/", 0) == 0 ? branch_tensors : model_tensors).emplace_back(std::move(name), std::move(t));
  }

  const std::uint32_t meta_len = r.u32();
  const std::string text = r.str(meta_len);
  if (r.remaining() != 4) fail("checkpoint: truncated file " + path.string());
  const std::uint32_t stored_crc = r.u32();
  if (Crc32::of(bytes.data(), bytes.size() - 4) != stored_crc) {
    fail("checkpoint: CRC mismatch in " + path.string());
  }

  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("checkpoint: malformed metadata JSON in " + path.string());

  LoadedCheckpoint loaded{CwccModel::from_named_tensors(config_from_json(j), model_tensors),
                          std::nullopt,
                          CheckpointMeta{},
                          stored_crc};
  loaded.meta.seed = j.value("seed", std::uint64_t(0));
  loaded.meta.epoch = j.value("epoch", 0);
  const bool has_branch = j.value("has_uncertainty", false);
  if (has_branch != !branch_tensors.empty()) {
    fail("checkpoint: metadata and tensor list disagree about the uncertainty branch");
  }
  if (has_branch) {
    loaded.branch =
        UncertaintyBranch::from_named_tensors(loaded.model.config().hidden_units, branch_tensors);
  }
  return loaded;
}

}  // namespace cwcc
