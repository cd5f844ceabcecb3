#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wkm {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of substream `stream` under master `seed`. Distinct (seed, stream)
// pairs give unrelated generators, so work items can be scheduled in any
// order without changing results.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x9e3779b97f4a7c15ULL));
}

// Folds a sequence of keys into one seed, e.g. (seed, scenario, n, rep).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t s = seed;
  for (auto k : keys) s = substream_seed(s, k);
  return s;
}

// A single reproducible stream. std::mt19937_64 output is fixed by the
// standard, and the uniform mapping below is ours, so draws are identical on
// every conforming platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : engine_(substream_seed(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1): (k + 1/2) / 2^53.
  double uniform_open() {
    const std::uint64_t k = engine_() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wkm
