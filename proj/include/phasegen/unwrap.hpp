#pragma once

#include "phasegen/image.hpp"

namespace phasegen {

// Laplacian-based phase unwrapping.  The true Laplacian is estimated from
// the wrapped field as cos(phi) * lap(sin(phi)) - sin(phi) * lap(cos(phi))
// with a 5-point stencil under reflective (Neumann) boundaries, the Poisson
// equation is solved exactly in a cosine-transform basis, and the solution
// is snapped so the output differs from the input by exact multiples of
// 2*pi per pixel.  Non-finite inputs are rejected.
RealGrid laplacian_unwrap(const RealGrid& wrapped);

}  // namespace phasegen
