#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phasegen/cvnn.hpp"
#include "phasegen/diffusion.hpp"
#include "phasegen/image.hpp"

namespace phasegen {

// One training-trace row: optimizer step index, batch-mean loss, and the
// learning rate in effect when the step was taken.
struct LossPoint {
  long long step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

// CSV with header "step,loss,lr".
void write_loss_csv(const std::string& path, const std::vector<LossPoint>& trace);
std::vector<LossPoint> read_loss_csv(const std::string& path);

struct PhasegenTrainConfig {
  int epochs = 8;
  int batch_size = 8;
  double lr = 1e-3;
  double dropout = 0.2;
  int timesteps = 50;
  int base_channels = 8;
  int depth = 2;
  uint64_t seed = 0;
  NoiseLaw noise_law = NoiseLaw::uniform;
  bool cartesian_mixing = false;  // additive forward process (ablation)
  cvnn::AdamConfig adam{};        // adam.lr is replaced by `lr`
  std::function<void(const LossPoint&)> on_step;
};

// A trained noise predictor together with the schedule it was trained
// against; sampling must reuse the same schedule.
struct PhasegenModel {
  cvnn::CvUNet<float> net;
  NoiseSchedule schedule;
};

// Trains the phase-noise predictor on complex records whose magnitudes act
// as conditioning.  Deterministic for a fixed (records, cfg): every random
// choice comes from substreams of cfg.seed keyed by step and batch slot, and
// gradients are reduced in slot order, so thread count does not affect the
// result.  Appends one LossPoint per optimizer step to `trace` if given.
PhasegenModel train_phasegen(const std::vector<ComplexImage>& records,
                             const PhasegenTrainConfig& cfg,
                             std::vector<LossPoint>* trace = nullptr);

}  // namespace phasegen
