#include "phasegen/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace phasegen {

namespace {

[[noreturn]] void throw_nonfinite(const char* what, int y, int x, double re, double im) {
  throw std::invalid_argument(std::string(what) + ": non-finite sample at (" +
                              std::to_string(y) + ", " + std::to_string(x) + "): re=" +
                              std::to_string(re) + " im=" + std::to_string(im));
}

}  // namespace

void validate_finite(const ComplexImage& z, const char* what) {
  for (int y = 0; y < z.height; ++y) {
    for (int x = 0; x < z.width; ++x) {
      const cfloat v = z.at(y, x);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw_nonfinite(what, y, x, v.real(), v.imag());
      }
    }
  }
}

void validate_finite(const RealGrid& g, const char* what) {
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const float v = g.at(y, x);
      if (!std::isfinite(v)) throw_nonfinite(what, y, x, v, 0.0);
    }
  }
}

double wrap_phase(double phi) {
  double w = std::fmod(phi + kPi, 2.0 * kPi);
  if (w <= 0.0) w += 2.0 * kPi;
  return w - kPi;
}

PolarImage to_polar(const ComplexImage& z) {
  validate_finite(z, "to_polar");
  PolarImage p;
  p.magnitude = RealGrid(z.height, z.width);
  p.phase = RealGrid(z.height, z.width);
  for (size_t i = 0; i < z.size(); ++i) {
    const double re = z.data[i].real();
    const double im = z.data[i].imag();
    const double mag = std::hypot(re, im);
    double phi = 0.0;
    if (mag != 0.0) {
      phi = std::atan2(im, re);
      // atan2 returns [-pi, pi]; fold the closed lower end onto +pi.
      if (phi <= -kPi) phi = kPi;
    }
    p.magnitude.data[i] = static_cast<float>(mag);
    p.phase.data[i] = static_cast<float>(phi);
  }
  return p;
}

ComplexImage from_polar(const PolarImage& p) {
  if (!same_shape(p.magnitude, p.phase)) {
    throw std::invalid_argument("from_polar: magnitude/phase shape mismatch");
  }
  validate_finite(p.magnitude, "from_polar magnitude");
  validate_finite(p.phase, "from_polar phase");
  ComplexImage z(p.magnitude.height, p.magnitude.width);
  for (size_t i = 0; i < z.size(); ++i) {
    const double mag = p.magnitude.data[i];
    if (mag < 0.0) {
      throw std::invalid_argument("from_polar: negative magnitude at index " + std::to_string(i));
    }
    const double phi = p.phase.data[i];
    z.data[i] = cfloat(static_cast<float>(mag * std::cos(phi)),
                       static_cast<float>(mag * std::sin(phi)));
  }
  return z;
}

}  // namespace phasegen
