/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwcc {

/// Error type thrown by every module on contract violations.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320). Used by the RIF image
/// and checkpoint containers.
class Crc32 {
 public:
  void update(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint32_t c = state_;
    for (std::size_t i = 0; i < len; ++i) {
      c = table()[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    }
    state_ = c;
  }
  std::uint32_t value() const { return state_ ^ 0xffffffffu; }

  static std::uint32_t of(const void* bytes, std::size_t len) {
    Crc32 c;
    c.update(bytes, len);
    return c.value();
  }

 private:
  static const std::uint32_t* table() {
    static const auto t = [] {
      std::vector<std::uint32_t> v(256);
      for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        v[i] = c;
      }
      return v;
    }();
    return t.data();
  }
  std::uint32_t state_ = 0xffffffffu;
};

/// splitmix64; used to derive independent per-sample RNG streams from one seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform/Gaussian draws built directly from mt19937_64 output bits rather
// than std:: distributions, whose algorithms differ between standard
// libraries. Same seed, same stream, on every platform.

template <typename Rng>
double uniform01(Rng& rng) {
  return double(rng() >> 11) * (1.0 / 9007199254740992.0);  // [0,1), 53 bits
}

template <typename Rng>
double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller.
template <typename Rng>
double gauss01(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

/// FNV-1a over raw bytes; cheap content hash for freeze checks and report headers.
inline std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace cwcc
