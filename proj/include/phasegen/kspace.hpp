#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasegen/image.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

// Centered orthonormal 2D Fourier transforms: index-shift centering before
// and after the transform (even and odd sizes), 1/sqrt(H*W) scaling each
// direction, so ifft2c(fft2c(z)) == z up to roundoff and energy is
// preserved.  Arbitrary sizes are supported (power-of-two stages plus a
// Bluestein fallback).
ComplexImage fft2c(const ComplexImage& z);
ComplexImage ifft2c(const ComplexImage& z);

// Cartesian column-sampling pattern over k-space width.  `kept` flags one
// byte per column; a contiguous fully-sampled center block is always
// present.
struct SamplingMask {
  int width = 0;
  std::vector<uint8_t> kept;
  float acceleration = 1.0f;
  float center_fraction = 0.0f;

  int kept_count() const;
  int center_count() const;  // round-half-away-from-zero(center_fraction * width)
};

// Draws a mask: the center block is always kept; each remaining column is
// kept independently with probability p = (width/accel - center) /
// (width - center), clamped to [0, 1].
SamplingMask make_cartesian_mask(int width, float acceleration, float center_fraction, Rng& rng);

// Rank-1 CXT1 of 0/1 floats plus a text sidecar "<path>.meta" recording
// acceleration, center fraction, and the generator seed.
void write_mask(const std::string& path, const SamplingMask& mask, uint64_t seed);
SamplingMask read_mask(const std::string& path);

// Zeroes dropped columns; kept columns are copied bit-exactly.
ComplexImage apply_mask(const ComplexImage& kspace, const SamplingMask& mask);

// Inverse transform of masked k-space, split into polar form.
PolarImage zerofill_recon(const ComplexImage& masked_kspace);

// Replaces kept columns of `predicted` with `acquired` bit-exactly, leaves
// the rest untouched.  Idempotent.
ComplexImage data_consistency(const ComplexImage& predicted, const ComplexImage& acquired,
                              const SamplingMask& mask);

// Center crop / zero-pad in k-space index space (centers follow the
// floor(N/2) convention).  Used for coarse-scale consistency; the pad is
// the exact adjoint of the crop.
ComplexImage crop_center(const ComplexImage& kspace, int out_h, int out_w);
ComplexImage pad_center(const ComplexImage& kspace, int out_h, int out_w);
SamplingMask crop_center_mask(const SamplingMask& mask, int out_w);

}  // namespace phasegen
