#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace nfsde {

/// splitmix64 finalizer; used to derive keys and per-path seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent sub-seed for (root seed, stream purpose, index).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t purpose, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(root ^ splitmix64(purpose)) + index);
}

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += 0x9E3779B9U;
        key[1] += 0xBB67AE85U;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53U} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57U} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static constexpr Key key_from(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }
};

/// Open-interval uniform from 53 random bits.
inline double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> gaussian_pair(const Philox4x32::Counter& out) noexcept {
  const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
  const std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
  const double u1 = to_unit_open(a);
  const double u2 = to_unit_open(b);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

/// Sequential generator over a Philox stream: counter words 0-1 advance,
/// words 2-3 hold the stream id.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(Philox4x32::key_from(seed)), stream_(stream) {}

  std::uint64_t next_u64() noexcept {
    if (cached_) {
      cached_ = false;
      return cache_;
    }
    const auto out = Philox4x32::block(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    ++counter_;
    cache_ = (std::uint64_t{out[2]} << 32) | out[3];
    cached_ = true;
    return (std::uint64_t{out[0]} << 32) | out[1];
  }

  double uniform() noexcept { return to_unit_open(next_u64()); }

  double normal() noexcept {
    if (has_normal_) {
      has_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(phi);
    has_normal_ = true;
    return r * std::cos(phi);
  }

  /// Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint64_t cache_ = 0;
  bool cached_ = false;
  double spare_normal_ = 0.0;
  bool has_normal_ = false;
};

/// Stream purposes; keeps the independent randomness sources of one
/// experiment apart while deriving all of them from a single root seed.
enum class StreamPurpose : std::uint64_t {
  noise = 1,
  initial_law = 2,
  pair_sampler = 3,
  bootstrap = 4,
  reference_ensemble = 5,
  floor_ensemble = 6,
  importance = 7,
  resampling = 8,
};

constexpr std::uint64_t derive_seed(std::uint64_t root, StreamPurpose purpose, std::uint64_t index) noexcept {
  return derive_seed(root, static_cast<std::uint64_t>(purpose), index);
}

}  // namespace nfsde
