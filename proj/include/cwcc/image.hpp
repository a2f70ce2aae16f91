/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <filesystem>
#include <vector>

#include "cwcc/common.hpp"

namespace cwcc {

/// Linear-RGB radiometric image, interleaved r,g,b per pixel, values in [0,1].
struct LinearImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // height*width*3, row-major

  LinearImage() = default;
  LinearImage(int h, int w) : height(h), width(w), pixels(std::size_t(h) * w * 3, 0.0f) {
    if (h <= 0 || w <= 0) fail("image: non-positive dimensions");
  }

  float& at(int y, int x, int c) { return pixels[(std::size_t(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return pixels[(std::size_t(y) * width + x) * 3 + c]; }

  /// Finite, non-negative pixel data of the declared extent.
  void validate() const;
};

/// Native image container ("RIF"): magic CWIM, u32 version, u32 height,
/// u32 width, u32 channels(=3), float32 LE row-major payload, u32 CRC32.
void write_image(const LinearImage& image, const std::filesystem::path& path);
LinearImage read_image(const std::filesystem::path& path);

/// Bilinear resize preserving linearity (no gamma).
LinearImage resize_bilinear(const LinearImage& src, int out_h, int out_w);

bool png_import_available();

}  // namespace cwcc
