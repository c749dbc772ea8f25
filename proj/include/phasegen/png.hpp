#pragma once

#include <string>

#include "phasegen/image.hpp"

namespace phasegen {

// 8-bit grayscale PNG of the min-max normalized grid, one pixel per sample;
// a constant grid maps to mid-gray.
void write_png_magnitude(const std::string& path, const RealGrid& g);

// RGB PNG mapping phase onto a cyclic hue wheel, so -pi and +pi share a
// color.  One pixel per sample.
void write_png_phase(const std::string& path, const RealGrid& phase);

}  // namespace phasegen
