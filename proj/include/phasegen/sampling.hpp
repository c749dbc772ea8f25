#pragma once

#include "phasegen/cvnn.hpp"
#include "phasegen/diffusion.hpp"
#include "phasegen/image.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

struct SampleConfig {
  SigmaRule sigma_rule = SigmaRule::fixed_beta;
  NoiseLaw noise_law = NoiseLaw::uniform;
};

// Runs the full reverse chain conditioned on `magnitude` and returns the
// conditioning magnitude untouched alongside the synthesized phase.  The
// network must have been trained against `schedule`; timestep counts are
// cross-checked.  Consumes rng for the initial noise field and the per-step
// stochastic term (none on the final step).
PolarImage sample_phase(const RealGrid& magnitude, const cvnn::CvUNet<float>& net,
                        const NoiseSchedule& schedule, const SampleConfig& cfg, Rng& rng);

// Magnitude-driven sinusoidal phase guess, the non-learned baseline:
//   phase(y, x) = (sin(2 pi x / N) + cos(2 pi y / N)) * m_hat(y, x) + noise
// with m_hat the min-max normalized magnitude (all zero when the magnitude
// is constant), additive N(0, sigma^2) jitter, and the result wrapped to
// (-pi, pi].  sigma == 0 draws nothing from rng.  Square grids only.
PolarImage naive_phase(const RealGrid& magnitude, double sigma, Rng& rng);

}  // namespace phasegen
