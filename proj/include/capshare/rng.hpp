#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace capshare {

// Deterministic random stream. All randomness in the library flows through
// this wrapper so that a run is bit-reproducible from a single seed: the
// generator is mt19937_64 and every conversion below is defined in terms of
// its raw 64-bit output, never through distribution objects whose algorithms
// the standard leaves unspecified.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // 53-bit uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in {0, ..., n-1}, n >= 1.
  int uniform_index(int n) {
    int k = static_cast<int>(uniform01() * n);
    return k < n ? k : n - 1;
  }

  std::uint64_t raw() { return gen_(); }

  // Derives a child seed from (seed, path). Used to split independent
  // streams per (sweep point, realization, method) so parallel and serial
  // execution orders agree. splitmix64 finalizer per mix step.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = seed;
    for (std::uint64_t p : path) {
      h += 0x9e3779b97f4a7c15ULL + p;
      h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
      h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
      h = h ^ (h >> 31);
    }
    return h;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace capshare
