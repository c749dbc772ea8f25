#include "phasegen/recon.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasegen/parallel.hpp"

namespace phasegen {

using cvnn::complex_conv2d;
using cvnn::complex_conv2d_backward;
using cvnn::complex_prelu;
using cvnn::complex_prelu_backward;
using cvnn::extract_channel;
using cvnn::stack_channels;
using cvnn::upsample_nn2;
using cvnn::upsample_nn2_backward;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void add_into(ReconNet::FMap& dst, const ReconNet::FMap& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

// Gradient of the consistency projection with respect to its predicted
// input: kept columns contribute nothing, the rest pass through.
ComplexImage zero_kept_columns(const ComplexImage& g, const SamplingMask& mask) {
  return data_consistency(g, ComplexImage(g.height, g.width), mask);
}

}  // namespace

ReconNet::Conv ReconNet::add_conv(const std::string& name, int out_ch, int in_ch, int k,
                                  int stride, Rng& rng) {
  Conv c;
  c.stride = stride;
  c.widx = static_cast<int>(params_.items.size());
  params_.items.push_back(cvnn::make_conv_weight<float>(name + ".weight", out_ch, in_ch, k, rng));
  c.bidx = static_cast<int>(params_.items.size());
  params_.items.push_back(cvnn::make_conv_bias<float>(name + ".bias", out_ch));
  return c;
}

ReconNet::Prelu ReconNet::add_prelu(const std::string& name, int ch) {
  Prelu p;
  p.sidx = static_cast<int>(params_.items.size());
  params_.items.push_back(cvnn::make_prelu_slopes<float>(name + ".slope", ch));
  return p;
}

ReconNet::ResBlock ReconNet::add_res_block(const std::string& name, int in_ch, int out_ch,
                                           Rng& rng) {
  ResBlock blk;
  blk.conv1 = add_conv(name + ".conv1", out_ch, in_ch, 3, 1, rng);
  blk.prelu1 = add_prelu(name + ".prelu1", out_ch);
  blk.conv2 = add_conv(name + ".conv2", out_ch, out_ch, 3, 1, rng);
  blk.prelu2 = add_prelu(name + ".prelu2", out_ch);
  if (in_ch != out_ch) blk.proj = add_conv(name + ".proj", out_ch, in_ch, 1, 1, rng);
  return blk;
}

ReconNet::ReconNet(const ReconConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.base_channels < 1) fail("base_channels must be >= 1");
  if (cfg.depth < 1) fail("depth must be >= 1");

  stem_ = add_res_block("stem", 1, cfg.base_channels, rng);
  int ch = cfg.base_channels;
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string tag = std::to_string(l);
    down_.push_back(add_conv("down" + tag + ".conv", ch * 2, ch, 3, 2, rng));
    down_act_.push_back(add_prelu("down" + tag + ".prelu", ch * 2));
    enc_.push_back(add_res_block("enc" + tag, ch * 2, ch * 2, rng));
    dc_proj_.push_back(add_conv("dc" + tag + ".proj", 1, ch * 2, 1, 1, rng));
    dc_unproj_.push_back(add_conv("dc" + tag + ".unproj", ch * 2, 1, 1, 1, rng));
    ch *= 2;
  }
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const std::string tag = std::to_string(l);
    up_.push_back(add_conv("up" + tag + ".conv", ch / 2, ch, 3, 1, rng));
    up_act_.push_back(add_prelu("up" + tag + ".prelu", ch / 2));
    dec_.push_back(add_res_block("dec" + tag, ch / 2, ch / 2, rng));
    ch /= 2;
  }
  head_ = add_conv("head", 1, cfg.base_channels, 3, 1, rng);

  // Zero head: the untrained network is exactly the identity refinement, so
  // training starts from the zero-filled baseline rather than noise.
  auto& w = params_.items[head_.widx].values;
  std::fill(w.begin(), w.end(), 0.0f);
}

ReconNet::FMap ReconNet::run_conv(const Conv& c, const FMap& x, Tape* tape) const {
  if (tape) tape->acts.push_back(x);
  return complex_conv2d(x, params_.items[c.widx], params_.items[c.bidx], c.stride);
}

ReconNet::FMap ReconNet::conv_back(const Conv& c, const FMap& gout, Tape& tape, Params& grads,
                                   bool need_gx) const {
  if (tape.acts.empty()) throw std::logic_error("activation record exhausted");
  FMap x = std::move(tape.acts.back());
  tape.acts.pop_back();
  FMap gx;
  if (need_gx) gx = FMap(x.channels, x.height, x.width);
  complex_conv2d_backward(gout, x, params_.items[c.widx], c.stride, need_gx ? &gx : nullptr,
                          grads.items[c.widx], grads.items[c.bidx]);
  return gx;
}

ReconNet::FMap ReconNet::run_prelu(const Prelu& p, const FMap& x, Tape* tape) const {
  if (tape) tape->acts.push_back(x);
  return complex_prelu(x, params_.items[p.sidx]);
}

ReconNet::FMap ReconNet::prelu_back(const Prelu& p, const FMap& gout, Tape& tape,
                                    Params& grads) const {
  if (tape.acts.empty()) throw std::logic_error("activation record exhausted");
  FMap x = std::move(tape.acts.back());
  tape.acts.pop_back();
  FMap gx(x.channels, x.height, x.width);
  complex_prelu_backward(gout, x, params_.items[p.sidx], &gx, grads.items[p.sidx]);
  return gx;
}

ReconNet::FMap ReconNet::run_block(const ResBlock& blk, const FMap& x, Tape* tape) const {
  FMap h = run_conv(blk.conv1, x, tape);
  h = run_prelu(blk.prelu1, h, tape);
  h = run_conv(blk.conv2, h, tape);
  h = run_prelu(blk.prelu2, h, tape);
  FMap out = blk.proj.widx >= 0 ? run_conv(blk.proj, x, tape) : x;
  add_into(out, h);
  return out;
}

ReconNet::FMap ReconNet::block_back(const ResBlock& blk, const FMap& gout, Tape& tape,
                                    Params& grads, bool need_gx) const {
  FMap gx;
  if (blk.proj.widx >= 0)
    gx = conv_back(blk.proj, gout, tape, grads, need_gx);
  else if (need_gx)
    gx = gout;
  FMap g = prelu_back(blk.prelu2, gout, tape, grads);
  g = conv_back(blk.conv2, g, tape, grads);
  g = prelu_back(blk.prelu1, g, tape, grads);
  g = conv_back(blk.conv1, g, tape, grads, need_gx);
  if (!need_gx) return {};
  add_into(gx, g);
  return gx;
}

ReconOutput ReconNet::forward(const ComplexImage& zerofilled, const ComplexImage& acquired,
                              const SamplingMask& mask, Tape* tape) const {
  if (!same_shape(zerofilled, acquired)) fail("input and acquired k-space shapes differ");
  if (mask.width != zerofilled.width) fail("mask width does not match the input");
  const int div = 1 << cfg_.depth;
  if (zerofilled.height <= 0 || zerofilled.width <= 0 || zerofilled.height % div != 0 ||
      zerofilled.width % div != 0)
    fail("spatial dims must be positive multiples of " + std::to_string(div));
  if (tape) tape->clear();

  FMap f = run_block(stem_, stack_channels({&zerofilled}), tape);
  std::vector<FMap> skips;
  skips.reserve(cfg_.depth);
  for (int l = 0; l < cfg_.depth; ++l) {
    skips.push_back(f);
    FMap h = run_conv(down_[l], f, tape);
    h = run_prelu(down_act_[l], h, tape);
    f = run_block(enc_[l], h, tape);

    // Coarse consistency refinement: project the features to one channel,
    // pin the k-space center to the measurements at this scale, and feed the
    // correction back.
    FMap u = run_conv(dc_proj_[l], f, tape);
    ComplexImage ui = extract_channel(u, 0);
    ComplexImage ku = fft2c(ui);
    const SamplingMask cmask = crop_center_mask(mask, ku.width);
    ComplexImage kdc =
        data_consistency(ku, crop_center(acquired, ku.height, ku.width), cmask);
    ComplexImage vi = ifft2c(kdc);
    FMap add = run_conv(dc_unproj_[l], stack_channels({&vi}), tape);
    add_into(f, add);
  }
  for (int j = 0; j < cfg_.depth; ++j) {
    const int l = cfg_.depth - 1 - j;
    FMap u = upsample_nn2(f);
    u = run_conv(up_[j], u, tape);
    u = run_prelu(up_act_[j], u, tape);
    add_into(u, skips[l]);
    f = run_block(dec_[j], u, tape);
  }
  FMap h = run_conv(head_, f, tape);

  ComplexImage y = zerofilled;
  const ComplexImage delta = extract_channel(h, 0);
  for (size_t i = 0; i < y.size(); ++i) y.data[i] += delta.data[i];

  ReconOutput out;
  out.kspace = data_consistency(fft2c(y), acquired, mask);
  out.image = ifft2c(out.kspace);
  return out;
}

ReconNet::Params ReconNet::backward(const ComplexImage& grad_image, const SamplingMask& mask,
                                    Tape& tape) const {
  Params grads = cvnn::zeros_like(params_);

  // image = ifft2c(P(fft2c(y))) with P passing only unmeasured columns; the
  // chain is self-adjoint, so the gradient takes the same path.
  ComplexImage gy = ifft2c(zero_kept_columns(fft2c(grad_image), mask));

  FMap g = conv_back(head_, stack_channels({&gy}), tape, grads);
  std::vector<FMap> gskips(cfg_.depth);
  for (int j = cfg_.depth - 1; j >= 0; --j) {
    const int l = cfg_.depth - 1 - j;
    g = block_back(dec_[j], g, tape, grads);
    gskips[l] = g;
    g = prelu_back(up_act_[j], g, tape, grads);
    g = conv_back(up_[j], g, tape, grads);
    g = upsample_nn2_backward(g);
  }
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    FMap gv = conv_back(dc_unproj_[l], g, tape, grads);
    ComplexImage gku = fft2c(extract_channel(gv, 0));
    ComplexImage gui = ifft2c(zero_kept_columns(gku, crop_center_mask(mask, gku.width)));
    FMap gproj = conv_back(dc_proj_[l], stack_channels({&gui}), tape, grads);
    add_into(g, gproj);

    g = block_back(enc_[l], g, tape, grads);
    g = prelu_back(down_act_[l], g, tape, grads);
    g = conv_back(down_[l], g, tape, grads);
    add_into(g, gskips[l]);
  }
  block_back(stem_, g, tape, grads, false);
  if (!tape.acts.empty())
    throw std::logic_error("activation record out of step with the network graph");
  return grads;
}

ReconNet train_recon(const std::vector<ComplexImage>& records, const ReconTrainConfig& cfg,
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

  Rng root(cfg.seed);
  Rng init_rng = root.child(1);
  ReconNet net(ReconConfig{cfg.base_channels, cfg.depth}, init_rng);

  const size_t n = records.size();
  std::vector<ComplexImage> k_full;
  k_full.reserve(n);
  for (const ComplexImage& z : records) k_full.push_back(fft2c(z));

  std::vector<SamplingMask> masks(n);
  std::vector<ComplexImage> acquired(n);
  std::vector<ComplexImage> zerofilled(n);
  const auto remask = [&](int epoch) {
    for (size_t i = 0; i < n; ++i) {
      const uint64_t stream =
          cfg.redraw_masks_each_epoch
              ? 1000 + static_cast<uint64_t>(epoch) * n + i
              : 1000 + i;
      Rng mrng = root.child(stream);
      masks[i] = make_cartesian_mask(w, cfg.acceleration, cfg.center_fraction, mrng);
      acquired[i] = apply_mask(k_full[i], masks[i]);
      zerofilled[i] = ifft2c(acquired[i]);
    }
  };
  remask(0);

  cvnn::AdamConfig acfg = cfg.adam;
  acfg.lr = cfg.lr;
  cvnn::Adam<float> adam(net.params(), acfg);

  const long long steps_per_epoch =
      std::max<long long>(1, static_cast<long long>(n) / cfg.batch_size);
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  std::vector<double> losses(batch);
  std::vector<ReconNet::Params> grads(batch);

  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.redraw_masks_each_epoch) remask(epoch);
    for (long long es = 0; es < steps_per_epoch; ++es, ++step) {
      parallel_for(batch, [&](size_t k) {
        Rng rng = root.child(2 + static_cast<uint64_t>(step) * batch + k);
        const size_t idx = static_cast<size_t>(rng.below(n));
        ReconNet::Tape tape;
        ReconOutput out = net.forward(zerofilled[idx], acquired[idx], masks[idx], &tape);
        cvnn::FeatureMap<float> ref = stack_channels({&records[idx]});
        cvnn::FeatureMap<float> got = stack_channels({&out.image});
        losses[k] = cvnn::loss_mse_complex(ref, got);
        ComplexImage gimg = extract_channel(cvnn::loss_mse_complex_grad(ref, got), 0);
        grads[k] = net.backward(gimg, masks[idx], tape);
      });

      ReconNet::Params total = cvnn::zeros_like(net.params());
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
  return net;
}

}  // namespace phasegen
