#pragma once

#include <cstdint>

#include "phasegen/image.hpp"

namespace phasegen {

// Synthetic head-like record: an ellipse-composite magnitude in [0, 1] with
// zero background, and a smooth wrapped ground-truth phase built from a
// low-order polynomial plus a few broad Gaussian bumps.
struct PhantomRecord {
  RealGrid magnitude;
  RealGrid true_phase;
};

// Deterministic per (seed, size); size must be >= 16.  The outer-ellipse
// parameter ranges keep the zero-magnitude background fraction within
// roughly 45-69% of the grid, and foreground magnitudes stay above 0.08.
PhantomRecord generate_phantom(uint64_t seed, int size);

// Region with usable signal; phase comparisons are restricted to it.
BinaryMask foreground_mask(const RealGrid& magnitude, float threshold = 0.05f);

// The record as a complex image (the training representation).
ComplexImage phantom_to_complex(const PhantomRecord& rec);

}  // namespace phasegen
