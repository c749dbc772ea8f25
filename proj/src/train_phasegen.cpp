#include "phasegen/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "phasegen/parallel.hpp"

namespace phasegen {

void write_loss_csv(const std::string& path, const std::vector<LossPoint>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open loss trace for writing: " + path);
  out << "step,loss,lr\n";
  char row[96];
  for (const LossPoint& p : trace) {
    std::snprintf(row, sizeof row, "%lld,%.17g,%.17g\n", p.step, p.loss, p.lr);
    out << row;
  }
  if (!out) throw std::runtime_error("failed writing loss trace: " + path);
}

std::vector<LossPoint> read_loss_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open loss trace: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,loss,lr", 0) != 0)
    throw std::runtime_error("loss trace missing 'step,loss,lr' header: " + path);
  std::vector<LossPoint> trace;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    LossPoint p;
    if (std::sscanf(line.c_str(), "%lld,%lg,%lg", &p.step, &p.loss, &p.lr) != 3)
      throw std::runtime_error("malformed loss trace row " + std::to_string(lineno) +
                               ": " + path);
    trace.push_back(p);
  }
  return trace;
}

namespace {

// (|z|, 0) conditioning channel for one record.
ComplexImage magnitude_channel(const ComplexImage& z) {
  ComplexImage m(z.height, z.width);
  for (size_t i = 0; i < z.size(); ++i) m.data[i] = cfloat(std::abs(z.data[i]), 0.0f);
  return m;
}

}  // namespace

PhasegenModel train_phasegen(const std::vector<ComplexImage>& records,
                             const PhasegenTrainConfig& cfg,
                             std::vector<LossPoint>* trace) {
  if (records.empty()) throw std::invalid_argument("training set is empty");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");

  const int h = records[0].height, w = records[0].width;
  for (const ComplexImage& z : records) {
    if (z.height != h || z.width != w)
      throw std::invalid_argument("training records must share one shape");
    validate_finite(z, "training record");
  }

  NoiseSchedule schedule = cosine_schedule(cfg.timesteps);

  cvnn::CvUNetConfig ncfg;
  ncfg.base_channels = cfg.base_channels;
  ncfg.depth = cfg.depth;
  ncfg.dropout = cfg.dropout;
  ncfg.timesteps = cfg.timesteps;
  Rng root(cfg.seed);
  Rng init_rng = root.child(1);
  cvnn::CvUNet<float> net(ncfg, init_rng);

  std::vector<ComplexImage> cond;
  cond.reserve(records.size());
  for (const ComplexImage& z : records) cond.push_back(magnitude_channel(z));

  cvnn::AdamConfig acfg = cfg.adam;
  acfg.lr = cfg.lr;
  cvnn::Adam<float> adam(net.params(), acfg);

  const size_t n = records.size();
  const long long steps_per_epoch =
      std::max<long long>(1, static_cast<long long>(n) / cfg.batch_size);
  const size_t batch = static_cast<size_t>(cfg.batch_size);

  std::vector<double> losses(batch);
  std::vector<cvnn::ParamSet<float>> grads(batch);

  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (long long es = 0; es < steps_per_epoch; ++es, ++step) {
      parallel_for(batch, [&](size_t k) {
        // One substream per (step, slot) pair keeps the draw sequence
        // independent of how slots land on threads.
        Rng rng = root.child(2 + static_cast<uint64_t>(step) * batch + k);
        const size_t idx = static_cast<size_t>(rng.below(n));
        const int t = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.timesteps)));
        ComplexImage eps = sample_unit_phase_noise(h, w, rng, cfg.noise_law);
        ComplexImage z_t = cfg.cartesian_mixing
                               ? q_sample_cartesian(records[idx], t, eps, schedule)
                               : q_sample(records[idx], t, eps, schedule);
        cvnn::FeatureMap<float> x = cvnn::stack_channels({&z_t, &cond[idx]});
        cvnn::Tape<float> tape;
        cvnn::FeatureMap<float> eps_hat =
            net.forward(x, t, cvnn::Mode::train, &rng, &tape);
        cvnn::FeatureMap<float> eps_fm = cvnn::stack_channels({&eps});
        losses[k] = cvnn::loss_mse_complex(eps_fm, eps_hat);
        grads[k] = net.backward(cvnn::loss_mse_complex_grad(eps_fm, eps_hat), tape);
      });

      // Slot-order reduction: identical result for any worker count.
      cvnn::ParamSet<float> total = cvnn::zeros_like(net.params());
      double loss = 0.0;
      for (size_t k = 0; k < batch; ++k) {
        cvnn::accumulate_scaled(total, grads[k], 1.0f / static_cast<float>(batch));
        loss += losses[k];
      }
      loss /= static_cast<double>(batch);
      if (!std::isfinite(loss))
        throw std::runtime_error("training loss is not finite at step " +
                                 std::to_string(step));

      LossPoint point{step, loss, adam.learning_rate()};
      adam.step(net.params(), total);
      if (trace) trace->push_back(point);
      if (cfg.on_step) cfg.on_step(point);
    }
    adam.advance_epoch();
  }

  return PhasegenModel{std::move(net), std::move(schedule)};
}

}  // namespace phasegen
