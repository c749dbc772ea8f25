#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "phasegen/cvnn.hpp"
#include "phasegen/image.hpp"
#include "phasegen/kspace.hpp"
#include "phasegen/rng.hpp"
#include "phasegen/train.hpp"

namespace phasegen {

struct ReconConfig {
  int base_channels = 8;
  int depth = 2;  // spatial dims must divide 2^depth
};

struct ReconOutput {
  ComplexImage image;   // inverse transform of kspace
  ComplexImage kspace;  // data-consistent estimate: acquired columns bit-exact
};

// Unrolled reconstruction network: a complex residual U-Net over the
// zero-filled image with a measurement-consistency refinement after every
// encoder level (the coarse k-space center stands in for the full grid at
// reduced scales) and a hard data-consistency projection on the output.
// Float only; gradients come from the adjoints of the transform and
// projection steps, which are exercised by dedicated tests.
class ReconNet {
 public:
  using FMap = cvnn::FeatureMap<float>;
  using Params = cvnn::ParamSet<float>;

  struct Tape {
    std::vector<FMap> acts;
    void clear() { acts.clear(); }
  };

  ReconNet(const ReconConfig& cfg, Rng& rng);

  const ReconConfig& config() const { return cfg_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }
  size_t param_scalar_count() const { return params_.scalar_count(); }

  // zerofilled is the image-domain input, acquired the masked k-space it came
  // from, mask the pattern that produced it.  A non-null tape records the
  // activations backward() needs; inference passes nullptr.
  ReconOutput forward(const ComplexImage& zerofilled, const ComplexImage& acquired,
                      const SamplingMask& mask, Tape* tape = nullptr) const;

  // Parameter gradients of a real loss, given its gradient with respect to
  // the output image.  `tape` must come from the matching forward call.
  Params backward(const ComplexImage& grad_image, const SamplingMask& mask, Tape& tape) const;

 private:
  struct Conv {
    int widx = -1;
    int bidx = -1;
    int stride = 1;
  };
  struct Prelu {
    int sidx = -1;
  };
  struct ResBlock {
    Conv conv1, conv2, proj;
    Prelu prelu1, prelu2;
  };

  Conv add_conv(const std::string& name, int out_ch, int in_ch, int k, int stride, Rng& rng);
  Prelu add_prelu(const std::string& name, int ch);
  ResBlock add_res_block(const std::string& name, int in_ch, int out_ch, Rng& rng);

  FMap run_conv(const Conv& c, const FMap& x, Tape* tape) const;
  FMap conv_back(const Conv& c, const FMap& gout, Tape& tape, Params& grads,
                 bool need_gx = true) const;
  FMap run_prelu(const Prelu& p, const FMap& x, Tape* tape) const;
  FMap prelu_back(const Prelu& p, const FMap& gout, Tape& tape, Params& grads) const;
  FMap run_block(const ResBlock& blk, const FMap& x, Tape* tape) const;
  FMap block_back(const ResBlock& blk, const FMap& gout, Tape& tape, Params& grads,
                  bool need_gx = true) const;

  ReconConfig cfg_;
  Params params_;
  ResBlock stem_;
  std::vector<Conv> down_;
  std::vector<Prelu> down_act_;
  std::vector<ResBlock> enc_;
  std::vector<Conv> dc_proj_;
  std::vector<Conv> dc_unproj_;
  std::vector<Conv> up_;
  std::vector<Prelu> up_act_;
  std::vector<ResBlock> dec_;
  Conv head_;
};

struct ReconTrainConfig {
  int epochs = 6;
  int batch_size = 4;
  double lr = 1e-3;
  float acceleration = 4.0f;
  float center_fraction = 0.08f;
  int base_channels = 8;
  int depth = 2;
  uint64_t seed = 0;
  bool redraw_masks_each_epoch = false;
  cvnn::AdamConfig adam{};  // adam.lr is replaced by `lr`
  std::function<void(const LossPoint&)> on_step;
};

// Trains ReconNet on fully sampled complex records: each record gets its own
// sampling mask (fixed across epochs unless redraw_masks_each_epoch), the
// zero-filled inverse is the input, and the loss is complex image-domain MSE
// against the record.  Deterministic per (records, cfg) regardless of thread
// count.
ReconNet train_recon(const std::vector<ComplexImage>& records, const ReconTrainConfig& cfg,
                     std::vector<LossPoint>* trace = nullptr);

}  // namespace phasegen
