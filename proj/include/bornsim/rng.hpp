#pragma once

#include <cstdint>
#include <limits>

namespace bornsim {

// Counter-based substream generator. Every (seed, domain, index) triple maps to
// an independent SplitMix64 sequence, so a record's random draws depend only on
// its index and never on which worker produced it.
class SubstreamRng {
 public:
  using result_type = std::uint64_t;

  SubstreamRng(std::uint64_t seed, std::uint64_t domain, std::uint64_t index)
      : state_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ mix(domain + 0xbb67ae8584caa73bULL) ^
                   (index * 0x9e3779b97f4a7c15ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// Stream domains keep the different experiment kinds on disjoint substreams.
namespace stream_domain {
inline constexpr std::uint64_t kUniform = 1;
inline constexpr std::uint64_t kPhysical = 2;
inline constexpr std::uint64_t kTrajectory = 3;
inline constexpr std::uint64_t kOracleCheck = 4;
}  // namespace stream_domain

}  // namespace bornsim
