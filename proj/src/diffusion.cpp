#include "phasegen/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phasegen {

namespace {

void validate_schedule_args(int timesteps) {
  if (timesteps < 1) throw std::invalid_argument("schedule: timesteps must be >= 1");
}

void finalize(NoiseSchedule& s) {
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double prod = 1.0;
  for (size_t i = 0; i < s.beta.size(); ++i) {
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
}

void check_t(int t, const NoiseSchedule& schedule, const char* what) {
  if (t < 1 || t > schedule.timesteps) {
    throw std::invalid_argument(std::string(what) + ": t = " + std::to_string(t) +
                                " outside [1, " + std::to_string(schedule.timesteps) + "]");
  }
}

// Polar components of one sample; phase of an exact zero is 0, and the
// atan2 branch value -pi is folded onto +pi.
inline void polar_of(cfloat v, double& mag, double& phi) {
  const double re = v.real(), im = v.imag();
  mag = std::hypot(re, im);
  phi = 0.0;
  if (mag != 0.0) {
    phi = std::atan2(im, re);
    if (phi <= -kPi) phi = kPi;
  }
}

void check_unit_modulus(const ComplexImage& eps, const char* what) {
  for (size_t i = 0; i < eps.size(); ++i) {
    const double mag = std::hypot(static_cast<double>(eps.data[i].real()),
                                  static_cast<double>(eps.data[i].imag()));
    if (std::abs(mag - 1.0) > 1e-5) {
      throw std::invalid_argument(std::string(what) + ": noise modulus " + std::to_string(mag) +
                                  " at index " + std::to_string(i) + " is not 1 within 1e-5");
    }
  }
}

}  // namespace

NoiseSchedule cosine_schedule(int timesteps, double s) {
  validate_schedule_args(timesteps);
  if (s <= 0.0) throw std::invalid_argument("cosine_schedule: s must be > 0");
  auto f = [&](double t) {
    const double a = ((t / timesteps + s) / (1.0 + s)) * (kPi / 2.0);
    const double c = std::cos(a);
    return c * c;
  };
  NoiseSchedule sched;
  sched.timesteps = timesteps;
  sched.beta.resize(timesteps);
  const double f0 = f(0.0);
  double prev_bar = 1.0;  // alpha_bar(0)
  for (int t = 1; t <= timesteps; ++t) {
    const double bar = f(static_cast<double>(t)) / f0;
    double beta = 1.0 - bar / prev_bar;
    if (beta > 0.999) beta = 0.999;
    sched.beta[t - 1] = beta;
    prev_bar = bar;
  }
  finalize(sched);
  return sched;
}

NoiseSchedule linear_schedule(int timesteps, double beta_start, double beta_end) {
  validate_schedule_args(timesteps);
  if (!(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule sched;
  sched.timesteps = timesteps;
  sched.beta.resize(timesteps);
  for (int t = 0; t < timesteps; ++t) {
    const double frac = timesteps == 1 ? 0.0 : static_cast<double>(t) / (timesteps - 1);
    sched.beta[t] = beta_start + (beta_end - beta_start) * frac;
  }
  finalize(sched);
  return sched;
}

std::vector<double> snr_trace(const NoiseSchedule& schedule) {
  std::vector<double> out(schedule.timesteps);
  for (int t = 1; t <= schedule.timesteps; ++t) {
    const double bar = schedule.alpha_bar_at(t);
    out[t - 1] = std::sqrt(bar) / std::sqrt(1.0 - bar);
  }
  return out;
}

void write_schedule(const std::string& path, const NoiseSchedule& schedule) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_schedule: cannot open " + path);
  f << "t,beta,alpha,alpha_bar\n";
  f.precision(17);
  for (int t = 1; t <= schedule.timesteps; ++t) {
    f << t << ',' << schedule.beta_at(t) << ',' << schedule.alpha_at(t) << ','
      << schedule.alpha_bar_at(t) << '\n';
  }
}

NoiseSchedule read_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_schedule: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "t,beta,alpha,alpha_bar") {
    throw std::runtime_error("read_schedule: bad header in " + path);
  }
  NoiseSchedule s;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // t, implied by order
    std::getline(row, cell, ',');
    s.beta.push_back(std::stod(cell));
    std::getline(row, cell, ',');
    s.alpha.push_back(std::stod(cell));
    std::getline(row, cell, ',');
    s.alpha_bar.push_back(std::stod(cell));
  }
  s.timesteps = static_cast<int>(s.beta.size());
  return s;
}

ComplexImage sample_unit_phase_noise(int height, int width, Rng& rng, NoiseLaw law) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("sample_unit_phase_noise: empty shape");
  }
  ComplexImage z(height, width);
  for (auto& v : z.data) {
    const double phi =
        law == NoiseLaw::uniform ? rng.phase_uniform() : wrap_phase(rng.gaussian());
    v = cfloat(static_cast<float>(std::cos(phi)), static_cast<float>(std::sin(phi)));
  }
  return z;
}

ComplexImage forward_step(const ComplexImage& z_prev, const ComplexImage& eps, double alpha_t) {
  if (!same_shape(z_prev, eps)) throw std::invalid_argument("forward_step: shape mismatch");
  if (!(alpha_t > 0.0 && alpha_t <= 1.0)) {
    throw std::invalid_argument("forward_step: alpha_t must be in (0, 1]");
  }
  check_unit_modulus(eps, "forward_step");
  const double sa = std::sqrt(alpha_t);
  const double sb = std::sqrt(1.0 - alpha_t);
  ComplexImage out(z_prev.height, z_prev.width);
  for (size_t i = 0; i < out.size(); ++i) {
    double m_prev, phi_prev, m_eps, phi_eps;
    polar_of(z_prev.data[i], m_prev, phi_prev);
    polar_of(eps.data[i], m_eps, phi_eps);
    const double m = m_prev * sa + m_eps * sb;
    const double phi = phi_prev + phi_eps * sb;
    out.data[i] = cfloat(static_cast<float>(m * std::cos(phi)),
                         static_cast<float>(m * std::sin(phi)));
  }
  return out;
}

ComplexImage q_sample(const ComplexImage& z0, int t, const ComplexImage& eps,
                      const NoiseSchedule& schedule) {
  if (!same_shape(z0, eps)) throw std::invalid_argument("q_sample: shape mismatch");
  check_t(t, schedule, "q_sample");
  check_unit_modulus(eps, "q_sample");
  const double bar = schedule.alpha_bar_at(t);
  const double sa = std::sqrt(bar);
  const double sb = std::sqrt(1.0 - bar);
  ComplexImage out(z0.height, z0.width);
  for (size_t i = 0; i < out.size(); ++i) {
    double m0, phi0, m_eps, phi_eps;
    polar_of(z0.data[i], m0, phi0);
    polar_of(eps.data[i], m_eps, phi_eps);
    const double m = m0 * sa + m_eps * sb;
    const double phi = phi0 + phi_eps * sb;
    out.data[i] = cfloat(static_cast<float>(m * std::cos(phi)),
                         static_cast<float>(m * std::sin(phi)));
  }
  return out;
}

ComplexImage q_sample_cartesian(const ComplexImage& z0, int t, const ComplexImage& eps,
                                const NoiseSchedule& schedule) {
  if (!same_shape(z0, eps)) throw std::invalid_argument("q_sample_cartesian: shape mismatch");
  check_t(t, schedule, "q_sample_cartesian");
  check_unit_modulus(eps, "q_sample_cartesian");
  const double bar = schedule.alpha_bar_at(t);
  const float sa = static_cast<float>(std::sqrt(bar));
  const float sb = static_cast<float>(std::sqrt(1.0 - bar));
  ComplexImage out(z0.height, z0.width);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = sa * z0.data[i] + sb * eps.data[i];
  return out;
}

ComplexImage reverse_step(const ComplexImage& z_t, const ComplexImage& eps_hat, int t,
                          const NoiseSchedule& schedule, const ComplexImage& eta,
                          SigmaRule sigma_rule) {
  if (!same_shape(z_t, eps_hat) || !same_shape(z_t, eta)) {
    throw std::invalid_argument("reverse_step: shape mismatch");
  }
  check_t(t, schedule, "reverse_step");
  const double alpha = schedule.alpha_at(t);
  const double bar = schedule.alpha_bar_at(t);
  const double coef = bar < 1.0 ? (1.0 - alpha) / std::sqrt(1.0 - bar) : 0.0;
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double sigma = sigma_rule == SigmaRule::fixed_beta ? std::sqrt(schedule.beta_at(t)) : 0.0;

  ComplexImage out(z_t.height, z_t.width);
  for (size_t i = 0; i < out.size(); ++i) {
    double m_t, phi_t, m_eps, phi_eps, m_eta, phi_eta;
    polar_of(z_t.data[i], m_t, phi_t);
    polar_of(eps_hat.data[i], m_eps, phi_eps);
    polar_of(eta.data[i], m_eta, phi_eta);
    const double m = (m_t - coef * m_eps) * inv_sqrt_alpha + sigma * m_eta;
    const double phi = phi_t - coef * phi_eps + sigma * phi_eta;
    out.data[i] = cfloat(static_cast<float>(m * std::cos(phi)),
                         static_cast<float>(m * std::sin(phi)));
  }
  return out;
}

}  // namespace phasegen
