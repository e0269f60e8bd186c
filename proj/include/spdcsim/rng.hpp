#pragma once

#include <cstdint>
#include <initializer_list>

namespace spdcsim {

// Counter-based generator: the state walks a fixed Weyl sequence and every
// output is a finalizer hash of the state, so a stream is fully determined
// by its key tuple. Streams keyed by (seed, setting, event, ...) are
// independent of iteration or scheduling order.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Mixes a key tuple into a single stream seed.
  static SplitMix64 keyed(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t k : keys) {
      h = mix(h ^ mix(k));
    }
    return SplitMix64(h);
  }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace spdcsim
