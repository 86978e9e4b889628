#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace horizon {

// Consumers of randomness. Each gets its own sub-stream of a master seed.
enum class StreamKind : std::uint64_t {
  episode = 1,
  schedule_track = 2,
  exploration = 3,
  world = 4,
  data = 5,
  config = 6,
  evaluation = 7,
  replay = 8,
  init = 9,
};

struct SeedSpec {
  std::uint64_t master = 0;
  StreamKind kind = StreamKind::episode;
  std::uint64_t index = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based derivation: distinct (master, kind, index) triples map to
// unrelated engine seeds.
inline std::uint64_t derive_seed(const SeedSpec& s) {
  std::uint64_t h = splitmix64(s.master);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(s.kind) * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (s.index + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t index) {
  return derive_seed(SeedSpec{master, kind, index});
}

// A seeded random stream. Variate generation is done here rather than with
// <random> distributions so streams are bit-identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  explicit Rng(const SeedSpec& spec) : engine_(derive_seed(spec)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x < limit) return x % n;
    }
  }

  // Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace horizon
