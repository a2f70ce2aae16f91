/* SPDX-License-Identifier: Apache-2.0 */
#include "cwcc/image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#ifdef CWCC_HAVE_PNG
#include <png.h>
#endif

namespace cwcc {

namespace {

constexpr char kMagic[4] = {'C', 'W', 'I', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("image: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

#ifdef CWCC_HAVE_PNG
LinearImage read_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) fail("image: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (fp) std::fclose(fp);
    fail("image: libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail("image: failed to decode PNG " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);

  // Normalize every layout to 16-bit RGB; values map to [0,1] by /65535.
  png_set_expand(png);
  if (depth < 16) png_set_expand_16(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<unsigned char> row(std::size_t(w) * 6);
  LinearImage img{int(h), int(w)};
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        // 16-bit samples arrive in network byte order
        const unsigned char* p = row.data() + (std::size_t(x) * 3 + c) * 2;
        const std::uint16_t v = std::uint16_t((unsigned(p[0]) << 8) | p[1]);
        img.at(int(y), int(x), c) = float(v) / 65535.0f;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  img.validate();
  return img;
}
#endif

}  // namespace

void LinearImage::validate() const {
  if (height <= 0 || width <= 0) fail("image: non-positive dimensions");
  if (pixels.size() != std::size_t(height) * width * 3) {
    fail("image: pixel buffer length does not match " + std::to_string(height) + "x" + std::to_string(width) + "x3");
  }
  for (float v : pixels) {
    if (!std::isfinite(v)) fail("image: non-finite pixel value");
    if (v < 0.0f) fail("image: negative pixel value");
  }
}

void write_image(const LinearImage& image, const std::filesystem::path& path) {
  image.validate();
  std::string out;
  out.reserve(24 + image.pixels.size() * 4);
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, std::uint32_t(image.height));
  put_u32(out, std::uint32_t(image.width));
  put_u32(out, 3);
  const auto payload_off = out.size();
  out.resize(payload_off + image.pixels.size() * 4);
  std::memcpy(out.data() + payload_off, image.pixels.data(), image.pixels.size() * 4);
  put_u32(out, Crc32::of(out.data(), out.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("image: cannot write " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) fail("image: short write to " + path.string());
}

LinearImage read_image(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes[1] == 'P') {
#ifdef CWCC_HAVE_PNG
    return read_png(path);
#else
    fail("image: " + path.string() + " is a PNG but PNG support is not built in");
#endif
  }
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail("image: " + path.string() + " has unknown magic");
  }
  const std::uint32_t crc_stored = get_u32(bytes, bytes.size() - 4);
  if (Crc32::of(bytes.data(), bytes.size() - 4) != crc_stored) {
    fail("image: CRC mismatch in " + path.string());
  }
  if (get_u32(bytes, 4) != kVersion) fail("image: unsupported version in " + path.string());
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint32_t w = get_u32(bytes, 12);
  const std::uint32_t ch = get_u32(bytes, 16);
  if (ch != 3) fail("image: " + path.string() + " must have 3 channels, has " + std::to_string(ch));
  if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20) || std::uint64_t(h) * w > (1ull << 28)) {
    fail("image: dimension overflow in " + path.string());
  }
  const std::size_t expect = 24 + std::size_t(h) * w * 3 * 4;
  if (bytes.size() != expect) fail("image: " + path.string() + " is truncated or padded");
  LinearImage img{int(h), int(w)};
  std::memcpy(img.pixels.data(), bytes.data() + 20, img.pixels.size() * 4);
  img.validate();
  return img;
}

LinearImage resize_bilinear(const LinearImage& src, int out_h, int out_w) {
  src.validate();
  if (out_h <= 0 || out_w <= 0) fail("resize: non-positive output size");
  if (out_h == src.height && out_w == src.width) return src;
  LinearImage dst(out_h, out_w);
  const double sy = double(src.height) / out_h;
  const double sx = double(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(int(fy), src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(int(fx), src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
        const double bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
        dst.at(y, x, c) = float(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

bool png_import_available() {
#ifdef CWCC_HAVE_PNG
  return true;
#else
  return false;
#endif
}

}  // namespace cwcc
