#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace hiergibbs {

// Counter-based random numbers (Philox 2x64, 10 rounds).  Every variate is a
// pure function of (seed, stream, index), so per-coordinate substreams can be
// drawn in any order, from any thread, with identical results.  Adding or
// removing diagnostics never perturbs the sample path of another stream.
namespace rng {

constexpr uint64_t kPhiloxMul = 0xD2B74407B1CE6E93ULL;
constexpr uint64_t kPhiloxWeyl = 0x9E3779B97F4A7C15ULL;

inline std::pair<uint64_t, uint64_t> philox2x64(uint64_t c0, uint64_t c1,
                                                uint64_t key) {
  for (int round = 0; round < 10; ++round) {
    const unsigned __int128 prod =
        static_cast<unsigned __int128>(kPhiloxMul) * c0;
    const uint64_t hi = static_cast<uint64_t>(prod >> 64);
    const uint64_t lo = static_cast<uint64_t>(prod);
    c0 = hi ^ key ^ c1;
    c1 = lo;
    key += kPhiloxWeyl;
  }
  return {c0, c1};
}

// 53-bit uniforms; the first is in (0,1] so it is safe under log().
inline double to_unit_closed(uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}
inline double to_unit_half_open(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace rng

// Stream tags partition the counter space by purpose.
enum class StreamTag : uint64_t {
  kSweepNoise = 1,
  kSimulate = 2,
  kVariance = 3,
  kBootstrap = 4,
  kInit = 5,
};

inline uint64_t stream_id(StreamTag tag, uint64_t coordinate) {
  return (static_cast<uint64_t>(tag) << 56) | coordinate;
}

class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  double uniform(uint64_t stream, uint64_t index) const {
    auto [x0, x1] = rng::philox2x64(stream, index, seed_);
    (void)x1;
    return rng::to_unit_half_open(x0);
  }

  double normal(uint64_t stream, uint64_t index) const {
    auto [x0, x1] = rng::philox2x64(stream, index, seed_);
    const double u1 = rng::to_unit_closed(x0);
    const double u2 = rng::to_unit_half_open(x1);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  uint64_t seed_;
};

// Sequential view of one substream, for rejection samplers whose draw count
// varies (gamma variates).  The consumed-index state lives here, not in the
// generator, so parallel substreams stay independent.
class SubstreamRng {
 public:
  SubstreamRng(const CounterRng& rng, uint64_t stream)
      : rng_(&rng), stream_(stream) {}

  double uniform() { return rng_->uniform(stream_, next_++); }
  double normal() { return rng_->normal(stream_, next_++); }

  // Marsaglia-Tsang; shape boosted below 1 via the power-of-uniform identity.
  double gamma(double shape, double rate) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (u > 0.0 &&
          std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v / rate;
    }
  }

 private:
  const CounterRng* rng_;
  uint64_t stream_;
  uint64_t next_ = 0;
};

}  // namespace hiergibbs
