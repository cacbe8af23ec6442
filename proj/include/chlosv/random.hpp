#pragma once

#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace chlosv {

/// Counter-based generator: output i is a SplitMix64 finalizer applied to
/// key + i * golden. Distinct (seed, stream, substream) keys give streams that
/// can be created independently in any order, which keeps results identical
/// under any scheduling of per-particle work.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0)
      : state_(mix(mix(mix(seed) ^ (stream + kGolden)) ^ (substream * kGolden + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += kGolden;
    return mix(state_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t state_;
};

/// Stream identifiers; keeps the different consumers of one seed apart.
enum class Stream : std::uint64_t {
  kPrior = 1,
  kIndicators = 2,
  kPropagate = 3,
  kResample = 4,
  kLatentPath = 5,
  kBarPath = 6,
  kOracle = 7,
};

inline std::uint64_t stream_key(Stream s, std::uint64_t period) {
  return (static_cast<std::uint64_t>(s) << 48) ^ period;
}

template <typename Rng>
double standard_normal(Rng& rng) {
  boost::random::normal_distribution<double> n;
  return n(rng);
}

/// Uniform on the open interval (0, 1).
template <typename Rng>
double open_uniform(Rng& rng) {
  // 53 random mantissa bits, offset by half an ulp
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace chlosv
