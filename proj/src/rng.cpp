#include "phasegen/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace phasegen {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  // Mix seed and stream so distinct streams decorrelate even for small seeds.
  uint64_t x = seed ^ (stream * 0xd2b74407b1ce6e93ull + 0x9e3779b97f4a7c15ull);
  for (auto& w : s_) w = splitmix64(x);
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

Rng Rng::child(uint64_t stream) const {
  uint64_t x = seed_ ^ (stream_ * 0x9e3779b97f4a7c15ull);
  const uint64_t mixed = splitmix64(x);
  return Rng(mixed, stream);
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be nonzero");
  // Rejection sampling over the largest multiple of n to avoid modulo bias.
  const uint64_t limit = n * (UINT64_MAX / n);
  uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Rng::phase_uniform() {
  // (-pi, pi]: u = 0 maps to +pi, u -> 1 approaches -pi exclusively.
  const double u = uniform01();
  return 3.14159265358979323846 * (1.0 - 2.0 * u);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 == 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

}  // namespace phasegen
