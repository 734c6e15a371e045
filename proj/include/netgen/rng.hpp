#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace netgen {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a ^ (b * 0xd6e8feb86659fd93ULL);
  splitmix64(s);
  return splitmix64(s);
}

inline constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/**
 * @brief Splittable pseudo-random generator (xoshiro256** core).
 *
 * Every generator remembers the key it was derived from, so substreams depend
 * only on (seed, path of substream keys) and never on how many numbers the
 * parent has already produced. Uniform and normal variates are generated here
 * rather than through <random> distributions so that streams are bit-identical
 * across standard library implementations.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : key_(seed) { reseed(seed); }

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  /// Independent child stream identified by an integer key (sample index, chain id, ...).
  [[nodiscard]] Rng substream(std::uint64_t id) const noexcept {
    return Rng(detail::mix64(key_, id + 0x632be59bd9b4e019ULL));
  }

  /// Independent child stream identified by a component name.
  [[nodiscard]] Rng substream(std::string_view name) const noexcept {
    return Rng(detail::mix64(key_, detail::fnv1a(name)));
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1); safe to take logs of.
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's nearly-divisionless method.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via the Marsaglia polar method (spare value discarded).
  double normal() noexcept {
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

 private:
  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = detail::splitmix64(sm);
  }

  std::uint64_t key_;
  std::uint64_t s_[4]{};
};

}  // namespace netgen
