#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace triadda {

// Counter-style seeding: every particle owns an independent, cheap generator
// so ensemble advances stay bit-reproducible no matter how the particle loop
// is scheduled across threads.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
  return z ^ (z >> 33);
}

// Derive a child seed from a parent seed and a stream label.  Used to give
// repetitions, sweep points, and particles decorrelated RNG streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  Xoshiro256pp() : Xoshiro256pp(0, 0) {}
  Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = derive_seed(seed, stream);
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Standard normal variates via the polar method, with the spare deviate
// cached so one stream yields a fixed sequence irrespective of call sites.
struct NormalStream {
  Xoshiro256pp engine;
  double spare = 0.0;
  bool has_spare = false;

  NormalStream() = default;
  NormalStream(std::uint64_t seed, std::uint64_t stream) : engine(seed, stream) {}

  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u, v, s;
    do {
      u = 2.0 * engine.uniform() - 1.0;
      v = 2.0 * engine.uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare = v * f;
    has_spare = true;
    return u * f;
  }
};

// One independent stream per particle, all derived from a master seed.
class ParticleRngs {
 public:
  ParticleRngs(std::uint64_t seed, std::int64_t n) : streams_() {
    streams_.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
      streams_.emplace_back(seed, static_cast<std::uint64_t>(i));
  }
  NormalStream& stream(std::int64_t i) { return streams_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(streams_.size()); }

 private:
  std::vector<NormalStream> streams_;
};

}  // namespace triadda
