#include "phasegen/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phasegen {

PolarImage sample_phase(const RealGrid& magnitude, const cvnn::CvUNet<float>& net,
                        const NoiseSchedule& schedule, const SampleConfig& cfg, Rng& rng) {
  if (net.config().timesteps != schedule.timesteps)
    throw std::invalid_argument("network and schedule disagree on timestep count");
  validate_finite(magnitude, "conditioning magnitude");
  const int h = magnitude.height, w = magnitude.width;
  if (h <= 0 || w <= 0) throw std::invalid_argument("conditioning magnitude is empty");

  ComplexImage cond(h, w);
  for (size_t i = 0; i < cond.size(); ++i)
    cond.data[i] = cfloat(magnitude.data[i], 0.0f);

  ComplexImage z = sample_unit_phase_noise(h, w, rng, cfg.noise_law);
  for (int t = schedule.timesteps; t >= 1; --t) {
    cvnn::FeatureMap<float> x = cvnn::stack_channels({&z, &cond});
    ComplexImage eps_hat = cvnn::extract_channel(net.forward(x, t, cvnn::Mode::eval), 0);
    // The final step is deterministic: a zero eta, not a drawn one.
    ComplexImage eta = t > 1 ? sample_unit_phase_noise(h, w, rng, cfg.noise_law)
                             : ComplexImage(h, w);
    z = reverse_step(z, eps_hat, t, schedule, eta, cfg.sigma_rule);
  }

  PolarImage out;
  out.magnitude = magnitude;
  out.phase = to_polar(z).phase;
  return out;
}

PolarImage naive_phase(const RealGrid& magnitude, double sigma, Rng& rng) {
  validate_finite(magnitude, "magnitude");
  const int n = magnitude.height;
  if (n <= 0 || magnitude.width != n)
    throw std::invalid_argument("naive phase baseline requires a square grid");
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");

  const auto [mn_it, mx_it] =
      std::minmax_element(magnitude.data.begin(), magnitude.data.end());
  const double mn = *mn_it, range = *mx_it - *mn_it;

  PolarImage out;
  out.magnitude = magnitude;
  out.phase = RealGrid(n, n);
  for (int y = 0; y < n; ++y) {
    const double cy = std::cos(2.0 * kPi * y / n);
    for (int x = 0; x < n; ++x) {
      const double m_hat =
          range > 0.0 ? (magnitude.at(y, x) - mn) / range : 0.0;
      double phi = (std::sin(2.0 * kPi * x / n) + cy) * m_hat;
      if (sigma != 0.0) phi += sigma * rng.gaussian();
      out.phase.at(y, x) = static_cast<float>(wrap_phase(phi));
    }
  }
  return out;
}

}  // namespace phasegen
