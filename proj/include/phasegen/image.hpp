#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace phasegen {

using cfloat = std::complex<float>;

inline constexpr double kPi = 3.14159265358979323846;

// H x W grid of complex samples, row-major.  Carrier for both image-domain
// data and k-space data; real/imaginary parts are stored interleaved, so
// raw() views the buffer as 2*H*W floats.
struct ComplexImage {
  int height = 0;
  int width = 0;
  std::vector<cfloat> data;

  ComplexImage() = default;
  ComplexImage(int h, int w)
      : height(h), width(w), data(static_cast<size_t>(h) * static_cast<size_t>(w)) {}

  size_t size() const { return data.size(); }
  cfloat& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  const cfloat& at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  float* raw() { return reinterpret_cast<float*>(data.data()); }
  const float* raw() const { return reinterpret_cast<const float*>(data.data()); }
};

// H x W grid of real samples, row-major.
struct RealGrid {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  RealGrid() = default;
  RealGrid(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

  size_t size() const { return data.size(); }
  float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  const float& at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

// Polar view of a complex image: nonnegative magnitudes plus phases in
// (-pi, pi].  Zero samples carry phase 0 by convention.
struct PolarImage {
  RealGrid magnitude;
  RealGrid phase;

  int height() const { return magnitude.height; }
  int width() const { return magnitude.width; }
};

// H x W binary grid (0/1), row-major.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w, uint8_t fill = 0)
      : height(h), width(w), data(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

  size_t size() const { return data.size(); }
  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  const uint8_t& at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

template <class A, class B>
bool same_shape(const A& a, const B& b) {
  return a.height == b.height && a.width == b.width;
}

// Throws std::invalid_argument naming `what` and the first offending index
// if any sample is NaN or infinite.
void validate_finite(const ComplexImage& z, const char* what);
void validate_finite(const RealGrid& g, const char* what);

// Maps any angle to its representative in (-pi, pi].
double wrap_phase(double phi);

// Splits z into magnitude/phase grids.  Phase of an exact zero sample is 0;
// all phases land in (-pi, pi].
PolarImage to_polar(const ComplexImage& z);

// Recombines magnitude/phase into a complex image.  Negative magnitudes and
// shape mismatches are rejected.
ComplexImage from_polar(const PolarImage& p);

}  // namespace phasegen
