#pragma once

#include <cstdint>

namespace phasegen {

// Deterministic xoshiro256++ generator seeded through splitmix64.
// Identical (seed, stream) pairs and call sequences reproduce identical
// values on every platform.  child(k) derives an independent stream from
// the parent's identity, so per-sample or per-step substreams do not depend
// on worker scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  Rng child(uint64_t stream) const;

  uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double uniform01();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).  n must be nonzero.
  uint64_t below(uint64_t n);
  // Uniform angle in (-pi, pi].
  double phase_uniform();
  // Standard normal via Box-Muller (second value cached).
  double gaussian();

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  uint64_t s_[4];
  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace phasegen
