#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasegen/image.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

// Variance schedule over timesteps t = 1..T (index t-1 in the arrays).
// alpha[t] = 1 - beta[t]; alpha_bar is the running product with
// alpha_bar(0) == 1 as the anchor.  Stored in double so monotonicity
// survives long products.
struct NoiseSchedule {
  int timesteps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double beta_at(int t) const { return beta[t - 1]; }
  double alpha_at(int t) const { return alpha[t - 1]; }
  double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
};

// alpha_bar(t) = f(t)/f(0) with f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2);
// betas are the ratio complements clipped to at most 0.999, and alpha_bar
// is rebuilt from the clipped betas by cumulative product.
NoiseSchedule cosine_schedule(int timesteps, double s = 0.008);

// Linearly spaced betas from beta_start to beta_end inclusive.
NoiseSchedule linear_schedule(int timesteps, double beta_start, double beta_end);

// Signal-to-noise ratio sqrt(alpha_bar(t)) / sqrt(1 - alpha_bar(t)) per t.
std::vector<double> snr_trace(const NoiseSchedule& schedule);

// Text table "t,beta,alpha,alpha_bar" with one row per timestep.
void write_schedule(const std::string& path, const NoiseSchedule& schedule);
NoiseSchedule read_schedule(const std::string& path);

// Phase law for unit-modulus noise fields.
enum class NoiseLaw {
  uniform,           // phase ~ U(-pi, pi]
  gaussian_wrapped,  // phase ~ N(0, 1) wrapped to (-pi, pi]
};

// Unit-modulus complex noise: every sample is exp(i*phase) with phase drawn
// from `law`.
ComplexImage sample_unit_phase_noise(int height, int width, Rng& rng,
                                     NoiseLaw law = NoiseLaw::uniform);

// One forward noising step:
//   |z_t|    = |z_{t-1}| sqrt(alpha_t) + |eps| sqrt(1 - alpha_t)
//   angle z_t = angle z_{t-1} + angle(eps) sqrt(1 - alpha_t)
// realized as a unit-complex rotation, so the sum wraps automatically.
// eps must be unit-modulus within 1e-5 per sample.
ComplexImage forward_step(const ComplexImage& z_prev, const ComplexImage& eps, double alpha_t);

// Single-shot jump to step t:
//   |z_t|    = sqrt(alpha_bar_t) |z_0| + sqrt(1 - alpha_bar_t)
//   angle z_t = angle z_0 + sqrt(1 - alpha_bar_t) angle(eps)
ComplexImage q_sample(const ComplexImage& z0, int t, const ComplexImage& eps,
                      const NoiseSchedule& schedule);

// Additive Cartesian variant of the forward jump, kept behind a config
// switch for ablation: z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps.
ComplexImage q_sample_cartesian(const ComplexImage& z0, int t, const ComplexImage& eps,
                                const NoiseSchedule& schedule);

enum class SigmaRule {
  fixed_beta,  // sigma_t = sqrt(beta_t)
  zero,        // deterministic reverse step
};

// One reverse step given the predicted noise field eps_hat:
//   |z_{t-1}|    = (|z_t| - (1-alpha_t)/sqrt(1-alpha_bar_t) |eps_hat|)/sqrt(alpha_t)
//                  + sigma_t |eta|
//   angle z_{t-1} = angle z_t - (1-alpha_t)/sqrt(1-alpha_bar_t) angle(eps_hat)
//                  + sigma_t angle(eta)
// The 1/sqrt(alpha_t) factor applies to the magnitude coordinate only.
// eta is unit-modulus noise, or a zero image to suppress the stochastic
// term (the t == 1 convention).
ComplexImage reverse_step(const ComplexImage& z_t, const ComplexImage& eps_hat, int t,
                          const NoiseSchedule& schedule, const ComplexImage& eta,
                          SigmaRule sigma_rule);

}  // namespace phasegen
