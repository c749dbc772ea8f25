#include "phasegen/cvnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phasegen/kernels.hpp"

namespace phasegen::cvnn {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

template <class T>
void check_conv_params(const FeatureMap<T>& x, const ParamTensor<T>& w, const ParamTensor<T>* b,
                       int stride) {
  if (w.dims.size() != 4 || !w.complex_valued || w.values.size() != 2 * w.elements())
    fail("conv weight " + w.name + " is not a rank-4 complex tensor");
  const int k = static_cast<int>(w.dims[2]);
  if (w.dims[2] != w.dims[3] || k % 2 == 0) fail("conv weight " + w.name + " needs a square odd kernel");
  if (static_cast<size_t>(x.channels) != w.dims[1])
    fail("conv " + w.name + ": input has " + std::to_string(x.channels) + " channels, weight expects " +
         std::to_string(w.dims[1]));
  if (b) {
    if (b->dims.size() != 1 || !b->complex_valued || b->dims[0] != w.dims[0])
      fail("conv bias " + b->name + " does not match weight " + w.name);
  }
  if (stride != 1 && stride != 2) fail("conv " + w.name + ": stride must be 1 or 2");
}

// Shift-and-accumulate complex convolution: one cmac span per kernel tap and
// output row.  Same padding; stride 2 subsamples the output grid.
template <class T>
void conv_accumulate(FeatureMap<T>& out, const FeatureMap<T>& x, const ParamTensor<T>& w,
                     int stride) {
  const int H = x.height, W = x.width;
  const int out_ch = static_cast<int>(w.dims[0]);
  const int in_ch = static_cast<int>(w.dims[1]);
  const int k = static_cast<int>(w.dims[2]);
  const int pad = k / 2;
  for (int oc = 0; oc < out_ch; ++oc) {
    for (int ic = 0; ic < in_ch; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const size_t wi = 2 * (((static_cast<size_t>(oc) * in_ch + ic) * k + ky) * k + kx);
          const T wr = w.values[wi], wim = w.values[wi + 1];
          if (stride == 1) {
            const int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
            const int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
            if (xhi <= xlo) continue;
            const size_t len = static_cast<size_t>(xhi - xlo);
            for (int y = ylo; y < yhi; ++y) {
              T* dst = reinterpret_cast<T*>(&out.at(oc, y, xlo));
              const T* src = reinterpret_cast<const T*>(&x.at(ic, y + dy, xlo + dx));
              kernels::cmac<T>(dst, src, wr, wim, len);
            }
          } else {
            if (W - 1 - dx < 0) continue;
            const int xlo = dx < 0 ? (-dx + 1) / 2 : 0;
            const int xhi = std::min(out.width, (W - 1 - dx) / 2 + 1);
            if (xhi <= xlo) continue;
            const size_t len = static_cast<size_t>(xhi - xlo);
            for (int yo = 0; yo < out.height; ++yo) {
              const int iy = 2 * yo + dy;
              if (iy < 0 || iy >= H) continue;
              T* dst = reinterpret_cast<T*>(&out.at(oc, yo, xlo));
              const T* src = reinterpret_cast<const T*>(&x.at(ic, iy, 2 * xlo + dx));
              kernels::cmac_strided<T>(dst, src, 2, wr, wim, len);
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ============================================================================
// Parameter helpers
// ============================================================================

template <class T>
ParamSet<T> zeros_like(const ParamSet<T>& p) {
  ParamSet<T> z;
  z.items.reserve(p.items.size());
  for (const auto& it : p.items) {
    ParamTensor<T> t;
    t.name = it.name;
    t.dims = it.dims;
    t.complex_valued = it.complex_valued;
    t.values.assign(it.values.size(), T(0));
    z.items.push_back(std::move(t));
  }
  return z;
}

template <class T>
void accumulate_scaled(ParamSet<T>& dst, const ParamSet<T>& src, T scale) {
  if (dst.items.size() != src.items.size()) fail("parameter set layouts differ");
  for (size_t i = 0; i < dst.items.size(); ++i) {
    auto& d = dst.items[i];
    const auto& s = src.items[i];
    if (d.values.size() != s.values.size()) fail("parameter tensor " + d.name + " layout differs");
    for (size_t j = 0; j < d.values.size(); ++j) d.values[j] += scale * s.values[j];
  }
}

template <class T>
ParamTensor<T> make_conv_weight(std::string name, int out_ch, int in_ch, int k, Rng& rng) {
  if (out_ch < 1 || in_ch < 1 || k < 1 || k % 2 == 0)
    fail("conv weight " + name + " needs positive channels and an odd kernel");
  ParamTensor<T> w;
  w.name = std::move(name);
  w.dims = {static_cast<size_t>(out_ch), static_cast<size_t>(in_ch), static_cast<size_t>(k),
            static_cast<size_t>(k)};
  w.complex_valued = true;
  w.values.resize(2 * w.elements());
  // Rayleigh modulus with E|w|^2 = 1/fan_in keeps the expected activation
  // modulus constant through complex-linear layers.
  const double sigma = 1.0 / std::sqrt(2.0 * in_ch * k * k);
  for (size_t i = 0; i < w.elements(); ++i) {
    const double mag = sigma * std::sqrt(-2.0 * std::log(1.0 - rng.uniform01()));
    const double phi = rng.phase_uniform();
    w.values[2 * i] = static_cast<T>(mag * std::cos(phi));
    w.values[2 * i + 1] = static_cast<T>(mag * std::sin(phi));
  }
  return w;
}

template <class T>
ParamTensor<T> make_conv_bias(std::string name, int out_ch) {
  if (out_ch < 1) fail("conv bias " + name + " needs positive channels");
  ParamTensor<T> b;
  b.name = std::move(name);
  b.dims = {static_cast<size_t>(out_ch)};
  b.complex_valued = true;
  b.values.assign(2 * static_cast<size_t>(out_ch), T(0));
  return b;
}

template <class T>
ParamTensor<T> make_prelu_slopes(std::string name, int ch, T slope) {
  if (ch < 1) fail("slopes " + name + " need positive channels");
  ParamTensor<T> s;
  s.name = std::move(name);
  s.dims = {static_cast<size_t>(ch)};
  s.complex_valued = false;
  s.values.assign(static_cast<size_t>(ch), slope);
  return s;
}

// ============================================================================
// Layer operations
// ============================================================================

template <class T>
FeatureMap<T> complex_conv2d(const FeatureMap<T>& x, const ParamTensor<T>& w,
                             const ParamTensor<T>& b, int stride) {
  check_conv_params(x, w, &b, stride);
  const int out_ch = static_cast<int>(w.dims[0]);
  const int Ho = stride == 1 ? x.height : (x.height + 1) / 2;
  const int Wo = stride == 1 ? x.width : (x.width + 1) / 2;
  FeatureMap<T> out(out_ch, Ho, Wo);
  for (int oc = 0; oc < out_ch; ++oc) {
    const std::complex<T> bias(b.values[2 * oc], b.values[2 * oc + 1]);
    std::fill(out.plane(oc), out.plane(oc) + out.plane_size(), bias);
  }
  conv_accumulate(out, x, w, stride);
  return out;
}

template <class T>
void complex_conv2d_backward(const FeatureMap<T>& gout, const FeatureMap<T>& x,
                             const ParamTensor<T>& w, int stride, FeatureMap<T>* gx,
                             ParamTensor<T>& gw, ParamTensor<T>& gb) {
  check_conv_params(x, w, static_cast<const ParamTensor<T>*>(nullptr), stride);
  const int out_ch = static_cast<int>(w.dims[0]);
  const int in_ch = static_cast<int>(w.dims[1]);
  const int k = static_cast<int>(w.dims[2]);
  const int pad = k / 2;
  const int H = x.height, W = x.width;
  const int Ho = stride == 1 ? H : (H + 1) / 2;
  const int Wo = stride == 1 ? W : (W + 1) / 2;
  if (gout.channels != out_ch || gout.height != Ho || gout.width != Wo)
    fail("conv " + w.name + ": upstream gradient shape mismatch");
  if (gw.values.size() != w.values.size()) fail("conv " + w.name + ": weight gradient layout differs");
  if (gb.values.size() != 2 * static_cast<size_t>(out_ch))
    fail("conv " + w.name + ": bias gradient layout differs");
  if (gx && (gx->channels != in_ch || gx->height != H || gx->width != W))
    fail("conv " + w.name + ": input gradient shape mismatch");

  for (int oc = 0; oc < out_ch; ++oc) {
    double re = 0.0, im = 0.0;
    kernels::csum<T>(reinterpret_cast<const T*>(gout.plane(oc)), gout.plane_size(), &re, &im);
    gb.values[2 * oc] += static_cast<T>(re);
    gb.values[2 * oc + 1] += static_cast<T>(im);
  }

  for (int oc = 0; oc < out_ch; ++oc) {
    for (int ic = 0; ic < in_ch; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const size_t wi = 2 * (((static_cast<size_t>(oc) * in_ch + ic) * k + ky) * k + kx);
          const T wr = w.values[wi], wim = w.values[wi + 1];
          double ar = 0.0, ai = 0.0;
          if (stride == 1) {
            const int ylo = std::max(0, -dy), yhi = std::min(H, H - dy);
            const int xlo = std::max(0, -dx), xhi = std::min(W, W - dx);
            if (xhi <= xlo) continue;
            const size_t len = static_cast<size_t>(xhi - xlo);
            for (int y = ylo; y < yhi; ++y) {
              const T* gsrc = reinterpret_cast<const T*>(&gout.at(oc, y, xlo));
              // d/d(input) of out = w * in is conj(w) * gout
              if (gx)
                kernels::cmac<T>(reinterpret_cast<T*>(&gx->at(ic, y + dy, xlo + dx)), gsrc, wr,
                                 -wim, len);
              double r = 0.0, i = 0.0;
              kernels::cdotc<T>(reinterpret_cast<const T*>(&x.at(ic, y + dy, xlo + dx)), gsrc, len,
                                &r, &i);
              ar += r;
              ai += i;
            }
          } else {
            if (W - 1 - dx < 0) continue;
            const int xlo = dx < 0 ? (-dx + 1) / 2 : 0;
            const int xhi = std::min(Wo, (W - 1 - dx) / 2 + 1);
            if (xhi <= xlo) continue;
            for (int yo = 0; yo < Ho; ++yo) {
              const int iy = 2 * yo + dy;
              if (iy < 0 || iy >= H) continue;
              for (int xo = xlo; xo < xhi; ++xo) {
                const int ix = 2 * xo + dx;
                const std::complex<T> g = gout.at(oc, yo, xo);
                const std::complex<T> xv = x.at(ic, iy, ix);
                if (gx) gx->at(ic, iy, ix) += std::complex<T>(wr, -wim) * g;
                ar += static_cast<double>(xv.real()) * g.real() +
                      static_cast<double>(xv.imag()) * g.imag();
                ai += static_cast<double>(xv.real()) * g.imag() -
                      static_cast<double>(xv.imag()) * g.real();
              }
            }
          }
          gw.values[wi] += static_cast<T>(ar);
          gw.values[wi + 1] += static_cast<T>(ai);
        }
      }
    }
  }
}

template <class T>
FeatureMap<T> complex_prelu(const FeatureMap<T>& x, const ParamTensor<T>& slopes) {
  if (slopes.complex_valued || slopes.dims.size() != 1 ||
      slopes.dims[0] != static_cast<size_t>(x.channels))
    fail("slopes " + slopes.name + " must be one real scalar per channel");
  FeatureMap<T> y(x.channels, x.height, x.width);
  const size_t span = 2 * x.plane_size(); // real and imaginary parts share the slope
  for (int c = 0; c < x.channels; ++c)
    kernels::prelu<T>(y.raw() + c * span, x.raw() + c * span, slopes.values[c], span);
  return y;
}

template <class T>
void complex_prelu_backward(const FeatureMap<T>& gout, const FeatureMap<T>& x,
                            const ParamTensor<T>& slopes, FeatureMap<T>* gx,
                            ParamTensor<T>& gslopes) {
  if (!same_dims(gout, x)) fail("prelu " + slopes.name + ": gradient shape mismatch");
  if (gslopes.values.size() != slopes.values.size())
    fail("prelu " + slopes.name + ": slope gradient layout differs");
  if (!gx) fail("prelu " + slopes.name + ": input gradient required");
  if (!same_dims(*gx, x)) fail("prelu " + slopes.name + ": input gradient shape mismatch");
  const size_t span = 2 * x.plane_size();
  for (int c = 0; c < x.channels; ++c) {
    const double gs = kernels::prelu_bwd<T>(gx->raw() + c * span, gout.raw() + c * span,
                                            x.raw() + c * span, slopes.values[c], span);
    gslopes.values[c] += static_cast<T>(gs);
  }
}

template <class T>
FeatureMap<T> complex_dropout(const FeatureMap<T>& x, double rate, Rng& rng, bool training,
                              std::vector<uint8_t>* keep) {
  if (!(rate >= 0.0 && rate < 1.0)) fail("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    // Identity; rate 0 consumes no randomness.
    if (keep) keep->assign(x.size(), 1);
    return x;
  }
  FeatureMap<T> y(x.channels, x.height, x.width);
  if (keep) keep->assign(x.size(), 1);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform01() < rate) {
      y.data[i] = std::complex<T>(0, 0);
      if (keep) (*keep)[i] = 0;
    } else {
      y.data[i] = x.data[i] * scale;
    }
  }
  return y;
}

template <class T>
FeatureMap<T> complex_dropout_backward(const FeatureMap<T>& gout, const std::vector<uint8_t>& keep,
                                       double rate) {
  if (keep.size() != gout.size()) fail("dropout mask does not match gradient shape");
  FeatureMap<T> gx(gout.channels, gout.height, gout.width);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < gout.size(); ++i)
    gx.data[i] = keep[i] ? gout.data[i] * scale : std::complex<T>(0, 0);
  return gx;
}

template <class T>
FeatureMap<T> upsample_nn2(const FeatureMap<T>& x) {
  FeatureMap<T> y(x.channels, 2 * x.height, 2 * x.width);
  for (int c = 0; c < x.channels; ++c)
    for (int yy = 0; yy < y.height; ++yy)
      for (int xx = 0; xx < y.width; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
  return y;
}

template <class T>
FeatureMap<T> upsample_nn2_backward(const FeatureMap<T>& gout) {
  if (gout.height % 2 != 0 || gout.width % 2 != 0) fail("upsample gradient dims must be even");
  FeatureMap<T> gx(gout.channels, gout.height / 2, gout.width / 2);
  for (int c = 0; c < gout.channels; ++c)
    for (int yy = 0; yy < gout.height; ++yy)
      for (int xx = 0; xx < gout.width; ++xx) gx.at(c, yy / 2, xx / 2) += gout.at(c, yy, xx);
  return gx;
}

template <class T>
double loss_mse_complex(const FeatureMap<T>& eps, const FeatureMap<T>& eps_hat) {
  if (!same_dims(eps, eps_hat)) fail("loss inputs have different shapes");
  if (eps.size() == 0) fail("loss inputs are empty");
  const double ss = kernels::sum_sq_diff<T>(eps_hat.raw(), eps.raw(), 2 * eps.size());
  return ss / static_cast<double>(eps.size());
}

template <class T>
FeatureMap<T> loss_mse_complex_grad(const FeatureMap<T>& eps, const FeatureMap<T>& eps_hat) {
  if (!same_dims(eps, eps_hat)) fail("loss inputs have different shapes");
  if (eps.size() == 0) fail("loss inputs are empty");
  FeatureMap<T> g(eps.channels, eps.height, eps.width);
  const T f = static_cast<T>(2.0 / static_cast<double>(eps.size()));
  for (size_t i = 0; i < eps.size(); ++i) g.data[i] = (eps_hat.data[i] - eps.data[i]) * f;
  return g;
}

// ============================================================================
// Residual U-Net
// ============================================================================

template <class T>
typename CvUNet<T>::Conv CvUNet<T>::add_conv(const std::string& name, int out_ch, int in_ch, int k,
                                             int stride, Rng& rng) {
  Conv c;
  c.stride = stride;
  c.widx = static_cast<int>(params_.items.size());
  params_.items.push_back(make_conv_weight<T>(name + ".weight", out_ch, in_ch, k, rng));
  c.bidx = static_cast<int>(params_.items.size());
  params_.items.push_back(make_conv_bias<T>(name + ".bias", out_ch));
  return c;
}

template <class T>
typename CvUNet<T>::Prelu CvUNet<T>::add_prelu(const std::string& name, int ch) {
  Prelu p;
  p.sidx = static_cast<int>(params_.items.size());
  params_.items.push_back(make_prelu_slopes<T>(name + ".slope", ch));
  return p;
}

template <class T>
typename CvUNet<T>::ResBlock CvUNet<T>::add_res_block(const std::string& name, int in_ch,
                                                      int out_ch, bool dropout, Rng& rng) {
  ResBlock blk;
  blk.conv1 = add_conv(name + ".conv1", out_ch, in_ch, 3, 1, rng);
  blk.prelu1 = add_prelu(name + ".prelu1", out_ch);
  blk.conv2 = add_conv(name + ".conv2", out_ch, out_ch, 3, 1, rng);
  blk.prelu2 = add_prelu(name + ".prelu2", out_ch);
  if (in_ch != out_ch) blk.proj = add_conv(name + ".proj", out_ch, in_ch, 1, 1, rng);
  blk.dropout = dropout;
  return blk;
}

template <class T>
CvUNet<T>::CvUNet(const CvUNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.base_channels < 1) fail("base_channels must be >= 1");
  if (cfg.depth < 1) fail("depth must be >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (cfg.timesteps < 1) fail("timesteps must be >= 1");

  const int in_ch = cfg.time_channel ? 3 : 2;
  stem_ = add_res_block("stem", in_ch, cfg.base_channels, true, rng);
  int ch = cfg.base_channels;
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string tag = std::to_string(l);
    down_.push_back(add_conv("down" + tag + ".conv", ch * 2, ch, 3, 2, rng));
    down_act_.push_back(add_prelu("down" + tag + ".prelu", ch * 2));
    enc_.push_back(add_res_block("enc" + tag, ch * 2, ch * 2, true, rng));
    ch *= 2;
  }
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const std::string tag = std::to_string(l);
    up_.push_back(add_conv("up" + tag + ".conv", ch / 2, ch, 3, 1, rng));
    up_act_.push_back(add_prelu("up" + tag + ".prelu", ch / 2));
    dec_.push_back(add_res_block("dec" + tag, ch / 2, ch / 2, false, rng));
    ch /= 2;
  }
  head_ = add_conv("head", 1, cfg.base_channels, 3, 1, rng);

  if (cfg.zero_init_head) {
    auto& w = params_.items[head_.widx].values;
    std::fill(w.begin(), w.end(), T(0));
    auto& b = params_.items[head_.bidx].values;
    std::fill(b.begin(), b.end(), T(0));
  }
}

template <class T>
FeatureMap<T> CvUNet<T>::run_conv(const Conv& c, const FeatureMap<T>& x, Tape<T>* tape) const {
  if (tape) tape->acts.push_back(x);
  return complex_conv2d(x, params_.items[c.widx], params_.items[c.bidx], c.stride);
}

template <class T>
FeatureMap<T> CvUNet<T>::conv_back(const Conv& c, const FeatureMap<T>& gout, Tape<T>& tape,
                                   ParamSet<T>& grads, bool need_gx) const {
  if (tape.acts.empty()) throw std::logic_error("activation record exhausted");
  FeatureMap<T> x = std::move(tape.acts.back());
  tape.acts.pop_back();
  FeatureMap<T> gx;
  if (need_gx) gx = FeatureMap<T>(x.channels, x.height, x.width);
  complex_conv2d_backward(gout, x, params_.items[c.widx], c.stride, need_gx ? &gx : nullptr,
                          grads.items[c.widx], grads.items[c.bidx]);
  return gx;
}

template <class T>
FeatureMap<T> CvUNet<T>::run_prelu(const Prelu& p, const FeatureMap<T>& x, Tape<T>* tape) const {
  if (tape) tape->acts.push_back(x);
  return complex_prelu(x, params_.items[p.sidx]);
}

template <class T>
FeatureMap<T> CvUNet<T>::prelu_back(const Prelu& p, const FeatureMap<T>& gout, Tape<T>& tape,
                                    ParamSet<T>& grads) const {
  if (tape.acts.empty()) throw std::logic_error("activation record exhausted");
  FeatureMap<T> x = std::move(tape.acts.back());
  tape.acts.pop_back();
  FeatureMap<T> gx(x.channels, x.height, x.width);
  complex_prelu_backward(gout, x, params_.items[p.sidx], &gx, grads.items[p.sidx]);
  return gx;
}

template <class T>
FeatureMap<T> CvUNet<T>::run_dropout(const FeatureMap<T>& x, Mode mode, Rng* rng,
                                     Tape<T>* tape) const {
  if (mode == Mode::eval) return x;
  std::vector<uint8_t> keep;
  FeatureMap<T> y = complex_dropout(x, cfg_.dropout, *rng, true, &keep);
  if (tape) tape->masks.push_back(std::move(keep));
  return y;
}

template <class T>
FeatureMap<T> CvUNet<T>::dropout_back(const FeatureMap<T>& gout, Tape<T>& tape) const {
  if (tape.masks.empty()) throw std::logic_error("activation record exhausted");
  std::vector<uint8_t> keep = std::move(tape.masks.back());
  tape.masks.pop_back();
  return complex_dropout_backward(gout, keep, cfg_.dropout);
}

template <class T>
FeatureMap<T> CvUNet<T>::run_block(const ResBlock& blk, const FeatureMap<T>& x, Mode mode,
                                   Rng* rng, Tape<T>* tape) const {
  FeatureMap<T> h = run_conv(blk.conv1, x, tape);
  h = run_prelu(blk.prelu1, h, tape);
  if (blk.dropout) h = run_dropout(h, mode, rng, tape);
  h = run_conv(blk.conv2, h, tape);
  h = run_prelu(blk.prelu2, h, tape);
  if (blk.dropout) h = run_dropout(h, mode, rng, tape);
  FeatureMap<T> out = blk.proj.widx >= 0 ? run_conv(blk.proj, x, tape) : x;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += h.data[i];
  return out;
}

template <class T>
FeatureMap<T> CvUNet<T>::block_back(const ResBlock& blk, const FeatureMap<T>& gout, Tape<T>& tape,
                                    ParamSet<T>& grads, bool need_gx) const {
  // The residual add fans the upstream gradient into both branches.
  FeatureMap<T> gx;
  if (blk.proj.widx >= 0)
    gx = conv_back(blk.proj, gout, tape, grads, need_gx);
  else if (need_gx)
    gx = gout;
  FeatureMap<T> g = gout;
  if (blk.dropout) g = dropout_back(g, tape);
  g = prelu_back(blk.prelu2, g, tape, grads);
  g = conv_back(blk.conv2, g, tape, grads);
  if (blk.dropout) g = dropout_back(g, tape);
  g = prelu_back(blk.prelu1, g, tape, grads);
  g = conv_back(blk.conv1, g, tape, grads, need_gx);
  if (!need_gx) return {};
  for (size_t i = 0; i < gx.size(); ++i) gx.data[i] += g.data[i];
  return gx;
}

template <class T>
FeatureMap<T> CvUNet<T>::forward(const FeatureMap<T>& x, int t_index, Mode mode, Rng* rng,
                                 Tape<T>* tape) const {
  if (x.channels != 2) fail("network input needs 2 channels: sample and conditioning magnitude");
  const int div = 1 << cfg_.depth;
  if (x.height <= 0 || x.width <= 0 || x.height % div != 0 || x.width % div != 0)
    fail("spatial dims must be positive multiples of " + std::to_string(div));
  if (t_index < 1 || t_index > cfg_.timesteps)
    fail("t_index " + std::to_string(t_index) + " outside 1.." + std::to_string(cfg_.timesteps));
  if (mode == Mode::train && (rng == nullptr || tape == nullptr))
    fail("train mode needs an rng and an activation record");
  if (tape) tape->clear();

  const int in_ch = cfg_.time_channel ? 3 : 2;
  FeatureMap<T> z(in_ch, x.height, x.width);
  std::copy(x.data.begin(), x.data.end(), z.data.begin());
  if (cfg_.time_channel) {
    const std::complex<T> tv(static_cast<T>(static_cast<double>(t_index) / cfg_.timesteps), T(0));
    std::fill(z.plane(2), z.plane(2) + z.plane_size(), tv);
  }

  std::vector<FeatureMap<T>> skips;
  skips.reserve(cfg_.depth);
  FeatureMap<T> f = run_block(stem_, z, mode, rng, tape);
  for (int l = 0; l < cfg_.depth; ++l) {
    skips.push_back(f);
    FeatureMap<T> h = run_conv(down_[l], f, tape);
    h = run_prelu(down_act_[l], h, tape);
    h = run_dropout(h, mode, rng, tape);
    f = run_block(enc_[l], h, mode, rng, tape);
  }
  for (int j = 0; j < cfg_.depth; ++j) {
    const int l = cfg_.depth - 1 - j;
    FeatureMap<T> u = upsample_nn2(f);
    u = run_conv(up_[j], u, tape);
    u = run_prelu(up_act_[j], u, tape);
    const FeatureMap<T>& s = skips[l];
    for (size_t i = 0; i < u.size(); ++i) u.data[i] += s.data[i];
    f = run_block(dec_[j], u, mode, rng, tape);
  }
  return run_conv(head_, f, tape);
}

template <class T>
ParamSet<T> CvUNet<T>::backward(const FeatureMap<T>& grad_out, Tape<T>& tape) const {
  ParamSet<T> grads = zeros_like(params_);
  FeatureMap<T> g = conv_back(head_, grad_out, tape, grads);
  std::vector<FeatureMap<T>> gskips(cfg_.depth);
  for (int j = cfg_.depth - 1; j >= 0; --j) {
    const int l = cfg_.depth - 1 - j;
    g = block_back(dec_[j], g, tape, grads);
    gskips[l] = g; // skip-connection branch of the decoder add
    g = prelu_back(up_act_[j], g, tape, grads);
    g = conv_back(up_[j], g, tape, grads);
    g = upsample_nn2_backward(g);
  }
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    g = block_back(enc_[l], g, tape, grads);
    g = dropout_back(g, tape);
    g = prelu_back(down_act_[l], g, tape, grads);
    g = conv_back(down_[l], g, tape, grads);
    for (size_t i = 0; i < g.size(); ++i) g.data[i] += gskips[l].data[i];
  }
  block_back(stem_, g, tape, grads, false);
  if (!tape.acts.empty() || !tape.masks.empty())
    throw std::logic_error("activation record out of step with the network graph");
  return grads;
}

// ============================================================================
// Optimizer
// ============================================================================

template <class T>
Adam<T>::Adam(const ParamSet<T>& params, const AdamConfig& cfg)
    : cfg_(cfg), lr_(cfg.lr), m_(zeros_like(params)), v_(zeros_like(params)) {
  if (!(cfg.lr > 0)) fail("learning rate must be positive");
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1))
    fail("beta coefficients must lie in [0, 1)");
}

template <class T>
void Adam<T>::step(ParamSet<T>& params, const ParamSet<T>& grads) {
  if (params.items.size() != grads.items.size() || params.items.size() != m_.items.size())
    fail("parameter/gradient layout mismatch");
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (size_t i = 0; i < params.items.size(); ++i) {
    auto& p = params.items[i];
    const auto& g = grads.items[i];
    if (g.values.size() != p.values.size()) fail("gradient layout differs for " + p.name);
    auto& m = m_.items[i].values;
    auto& v = v_.items[i].values;
    for (size_t j = 0; j < p.values.size(); ++j) {
      const double gj = g.values[j];
      if (!std::isfinite(gj))
        throw std::invalid_argument("non-finite gradient in " + p.name + " at index " +
                                    std::to_string(j));
      const double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      const double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double delta = lr_ * (mj / c1) / (std::sqrt(vj / c2) + cfg_.eps);
      p.values[j] = static_cast<T>(p.values[j] - delta);
    }
  }
}

// ============================================================================
// Conversions
// ============================================================================

FeatureMap<float> stack_channels(const std::vector<const ComplexImage*>& planes) {
  if (planes.empty()) fail("stack_channels needs at least one plane");
  for (const auto* p : planes)
    if (p == nullptr) fail("stack_channels got a null plane");
  const int h = planes[0]->height, w = planes[0]->width;
  for (const auto* p : planes)
    if (p->height != h || p->width != w) fail("stack_channels planes have different shapes");
  FeatureMap<float> f(static_cast<int>(planes.size()), h, w);
  for (size_t c = 0; c < planes.size(); ++c)
    std::copy(planes[c]->data.begin(), planes[c]->data.end(), f.plane(static_cast<int>(c)));
  return f;
}

ComplexImage extract_channel(const FeatureMap<float>& f, int channel) {
  if (channel < 0 || channel >= f.channels) fail("channel index out of range");
  ComplexImage img(f.height, f.width);
  std::copy(f.plane(channel), f.plane(channel) + f.plane_size(), img.data.begin());
  return img;
}

// ============================================================================
// Explicit instantiations: float runs training/inference, double backs the
// finite-difference gradient checks.
// ============================================================================

#define PG_INSTANTIATE(T)                                                                         \
  template struct FeatureMap<T>;                                                                  \
  template ParamSet<T> zeros_like(const ParamSet<T>&);                                            \
  template void accumulate_scaled(ParamSet<T>&, const ParamSet<T>&, T);                           \
  template ParamTensor<T> make_conv_weight(std::string, int, int, int, Rng&);                     \
  template ParamTensor<T> make_conv_bias(std::string, int);                                       \
  template ParamTensor<T> make_prelu_slopes(std::string, int, T);                                 \
  template FeatureMap<T> complex_conv2d(const FeatureMap<T>&, const ParamTensor<T>&,              \
                                        const ParamTensor<T>&, int);                              \
  template void complex_conv2d_backward(const FeatureMap<T>&, const FeatureMap<T>&,               \
                                        const ParamTensor<T>&, int, FeatureMap<T>*,               \
                                        ParamTensor<T>&, ParamTensor<T>&);                        \
  template FeatureMap<T> complex_prelu(const FeatureMap<T>&, const ParamTensor<T>&);              \
  template void complex_prelu_backward(const FeatureMap<T>&, const FeatureMap<T>&,                \
                                       const ParamTensor<T>&, FeatureMap<T>*, ParamTensor<T>&);   \
  template FeatureMap<T> complex_dropout(const FeatureMap<T>&, double, Rng&, bool,                \
                                         std::vector<uint8_t>*);                                  \
  template FeatureMap<T> complex_dropout_backward(const FeatureMap<T>&,                           \
                                                  const std::vector<uint8_t>&, double);           \
  template FeatureMap<T> upsample_nn2(const FeatureMap<T>&);                                      \
  template FeatureMap<T> upsample_nn2_backward(const FeatureMap<T>&);                             \
  template double loss_mse_complex(const FeatureMap<T>&, const FeatureMap<T>&);                   \
  template FeatureMap<T> loss_mse_complex_grad(const FeatureMap<T>&, const FeatureMap<T>&);       \
  template class CvUNet<T>;                                                                       \
  template class Adam<T>;

PG_INSTANTIATE(float)
PG_INSTANTIATE(double)

#undef PG_INSTANTIATE

}  // namespace phasegen::cvnn
