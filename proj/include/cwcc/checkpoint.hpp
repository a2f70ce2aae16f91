/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <filesystem>
#include <optional>

#include "cwcc/model.hpp"
#include "cwcc/uncertainty.hpp"

namespace cwcc {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
};

/// Container layout: magic "CWCK", u32 LE version (=1), u32 tensor count;
/// per tensor u16 name length, name, u8 rank, u32 dims, float32 LE row-major
/// payload; u32-length-prefixed UTF-8 JSON metadata; trailing u32 CRC32 of
/// all preceding bytes. Round trips are bit-exact.
void save_checkpoint(const CwccModel& model, const std::filesystem::path& path, const CheckpointMeta& meta = {},
                     const UncertaintyBranch* branch = nullptr);

struct LoadedCheckpoint {
  CwccModel model;
  std::optional<UncertaintyBranch> branch;
  CheckpointMeta meta;
  std::uint32_t crc = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cwcc
