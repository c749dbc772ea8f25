#include "phasegen/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "phasegen/rng.hpp"

namespace phasegen {

namespace {

struct Ellipse {
  double cx, cy;    // center, pixels
  double a, b;      // semi-axes, pixels
  double cos_t, sin_t;

  // Squared elliptical radius; <= 1 inside.
  double rho2(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double xr = dx * cos_t + dy * sin_t;
    const double yr = -dx * sin_t + dy * cos_t;
    return (xr / a) * (xr / a) + (yr / b) * (yr / b);
  }
};

struct Bump {
  double cx, cy, sigma, amp;
};

}  // namespace

PhantomRecord generate_phantom(uint64_t seed, int size) {
  if (size < 16) throw std::invalid_argument("phantom size must be >= 16");
  Rng rng(seed);
  const double half = size / 2.0;

  // Outer ellipse: semi-axis ranges put the foreground area fraction in
  // roughly [0.31, 0.55], so the background stays within the 20-70% band.
  Ellipse outer;
  outer.cx = size * (0.5 + rng.uniform(-0.03, 0.03));
  outer.cy = size * (0.5 + rng.uniform(-0.03, 0.03));
  outer.a = half * rng.uniform(0.66, 0.86);
  outer.b = half * rng.uniform(0.60, 0.82);
  const double theta = rng.uniform(0.0, kPi);
  outer.cos_t = std::cos(theta);
  outer.sin_t = std::sin(theta);

  const int n_inner = 2 + static_cast<int>(rng.below(3));
  std::vector<Ellipse> inner(n_inner);
  std::vector<double> delta(n_inner);
  for (int i = 0; i < n_inner; ++i) {
    // Centers live in the outer ellipse's rotated frame so the structures
    // stay inside the head.
    const double ux = rng.uniform(-0.55, 0.55) * outer.a;
    const double uy = rng.uniform(-0.55, 0.55) * outer.b;
    inner[i].cx = outer.cx + ux * outer.cos_t - uy * outer.sin_t;
    inner[i].cy = outer.cy + ux * outer.sin_t + uy * outer.cos_t;
    inner[i].a = std::max(1.5, outer.a * rng.uniform(0.10, 0.28));
    inner[i].b = std::max(1.5, outer.b * rng.uniform(0.10, 0.28));
    const double phi = rng.uniform(0.0, kPi);
    inner[i].cos_t = std::cos(phi);
    inner[i].sin_t = std::sin(phi);
    delta[i] = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.15, 0.35);
  }

  // Smooth phase: low-order polynomial in [-1, 1]^2 coordinates plus broad
  // Gaussian bumps, wrapped at the end.
  const double c0 = rng.uniform(-1.2, 1.2);
  const double cx1 = rng.uniform(-0.45, 0.45), cy1 = rng.uniform(-0.45, 0.45);
  const double cxx = rng.uniform(-0.3, 0.3), cyy = rng.uniform(-0.3, 0.3);
  const double cxy = rng.uniform(-0.3, 0.3);
  const int n_bumps = 2 + static_cast<int>(rng.below(3));
  std::vector<Bump> bumps(n_bumps);
  for (int i = 0; i < n_bumps; ++i) {
    bumps[i].cx = size * rng.uniform(0.2, 0.8);
    bumps[i].cy = size * rng.uniform(0.2, 0.8);
    bumps[i].sigma = half * rng.uniform(0.25, 0.5);
    bumps[i].amp = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.3, 0.9);
  }

  PhantomRecord rec{RealGrid(size, size), RealGrid(size, size)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r2 = outer.rho2(x, y);
      double m = 0.0;
      if (r2 <= 1.0) {
        m = 0.75;
        for (int i = 0; i < n_inner; ++i)
          if (inner[i].rho2(x, y) <= 1.0) m += delta[i];
        m = std::clamp(m, 0.1, 1.0);
        m *= 1.0 - 0.15 * r2; // gentle radial taper, keeps m >= 0.085
      }
      rec.magnitude.at(y, x) = static_cast<float>(m);

      const double u = 2.0 * x / (size - 1) - 1.0;
      const double v = 2.0 * y / (size - 1) - 1.0;
      double p = c0 + cx1 * u + cy1 * v + cxx * u * u + cyy * v * v + cxy * u * v;
      for (const Bump& bb : bumps) {
        const double dx = x - bb.cx, dy = y - bb.cy;
        p += bb.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * bb.sigma * bb.sigma));
      }
      rec.true_phase.at(y, x) = static_cast<float>(wrap_phase(p));
    }
  }
  return rec;
}

BinaryMask foreground_mask(const RealGrid& magnitude, float threshold) {
  BinaryMask mask(magnitude.height, magnitude.width);
  for (size_t i = 0; i < magnitude.size(); ++i)
    mask.data[i] = magnitude.data[i] > threshold ? 1 : 0;
  return mask;
}

ComplexImage phantom_to_complex(const PhantomRecord& rec) {
  PolarImage p;
  p.magnitude = rec.magnitude;
  p.phase = rec.true_phase;
  return from_polar(p);
}

}  // namespace phasegen
