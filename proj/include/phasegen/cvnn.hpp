#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "phasegen/image.hpp"
#include "phasegen/rng.hpp"

namespace phasegen::cvnn {

// ============================================================================
// Tensors and parameters
// ============================================================================

// C x H x W complex feature tensor, row-major planes, interleaved re/im.
// Instantiated for float (training/inference) and double (gradient checks);
// both run the same code paths.
template <class T>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::complex<T>> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c),
        height(h),
        width(w),
        data(static_cast<size_t>(c) * static_cast<size_t>(h) * static_cast<size_t>(w)) {}

  size_t plane_size() const { return static_cast<size_t>(height) * width; }
  size_t size() const { return data.size(); }
  std::complex<T>* plane(int c) { return data.data() + static_cast<size_t>(c) * plane_size(); }
  const std::complex<T>* plane(int c) const {
    return data.data() + static_cast<size_t>(c) * plane_size();
  }
  std::complex<T>& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  const std::complex<T>& at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  T* raw() { return reinterpret_cast<T*>(data.data()); }
  const T* raw() const { return reinterpret_cast<const T*>(data.data()); }
};

template <class T>
bool same_dims(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  return a.channels == b.channels && a.height == b.height && a.width == b.width;
}

// One named parameter tensor.  Complex tensors store interleaved re/im pairs
// (values.size() == 2 * elements()); real tensors store plain scalars.
// Conv weights are {out_ch, in_ch, k, k}, biases {out_ch}, PReLU slopes are
// real {channels}.
template <class T>
struct ParamTensor {
  std::string name;
  std::vector<size_t> dims;
  bool complex_valued = true;
  std::vector<T> values;

  size_t elements() const {
    size_t n = 1;
    for (size_t d : dims) n *= d;
    return n;
  }
  size_t scalar_count() const { return values.size(); }
};

// Ordered collection of parameter tensors; the order is the construction
// order and is part of the checkpoint contract.
template <class T>
struct ParamSet {
  std::vector<ParamTensor<T>> items;

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& it : items) n += it.scalar_count();
    return n;
  }
  ParamTensor<T>* find(std::string_view name) {
    for (auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
  const ParamTensor<T>* find(std::string_view name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
  void zero() {
    for (auto& it : items) std::fill(it.values.begin(), it.values.end(), T(0));
  }
};

// Same layout as `p`, every value zero.
template <class T>
ParamSet<T> zeros_like(const ParamSet<T>& p);

// dst += scale * src, item by item.  Layout must match.
template <class T>
void accumulate_scaled(ParamSet<T>& dst, const ParamSet<T>& src, T scale);

// Factories with the initialization used throughout: kernels get uniformly
// random phase and Rayleigh modulus with E|w|^2 = 1/(in_ch*k*k), biases zero,
// slopes a constant 0.25.
template <class T>
ParamTensor<T> make_conv_weight(std::string name, int out_ch, int in_ch, int k, Rng& rng);
template <class T>
ParamTensor<T> make_conv_bias(std::string name, int out_ch);
template <class T>
ParamTensor<T> make_prelu_slopes(std::string name, int ch, T slope = T(0.25));

// ============================================================================
// Layer operations
//
// Forward variants that take a Tape record what their backward needs; the
// standalone overloads below serve direct use and layer-level tests.
// Backward functions accumulate into caller-provided gradient tensors.
// ============================================================================

// Complex 2-D convolution, same padding, odd kernel, stride 1 or 2.
// Output spatial dims are ceil(H/stride) x ceil(W/stride).
template <class T>
FeatureMap<T> complex_conv2d(const FeatureMap<T>& x, const ParamTensor<T>& w,
                             const ParamTensor<T>& b, int stride = 1);

// gx/gw/gb accumulate d(loss)/d(input|weight|bias) given upstream gout.
// Pass gx == nullptr to skip the input gradient.
template <class T>
void complex_conv2d_backward(const FeatureMap<T>& gout, const FeatureMap<T>& x,
                             const ParamTensor<T>& w, int stride, FeatureMap<T>* gx,
                             ParamTensor<T>& gw, ParamTensor<T>& gb);

// PReLU applied to real and imaginary parts independently with one shared
// slope per channel.
template <class T>
FeatureMap<T> complex_prelu(const FeatureMap<T>& x, const ParamTensor<T>& slopes);

template <class T>
void complex_prelu_backward(const FeatureMap<T>& gout, const FeatureMap<T>& x,
                            const ParamTensor<T>& slopes, FeatureMap<T>* gx,
                            ParamTensor<T>& gslopes);

// Drops whole complex samples with probability `rate`, scales survivors by
// 1/(1-rate).  Identity when training == false.  When training, `keep` (if
// non-null) receives one flag per complex element for the backward pass.
template <class T>
FeatureMap<T> complex_dropout(const FeatureMap<T>& x, double rate, Rng& rng, bool training,
                              std::vector<uint8_t>* keep = nullptr);

template <class T>
FeatureMap<T> complex_dropout_backward(const FeatureMap<T>& gout, const std::vector<uint8_t>& keep,
                                       double rate);

// Nearest-neighbour 2x upsampling and its adjoint.
template <class T>
FeatureMap<T> upsample_nn2(const FeatureMap<T>& x);
template <class T>
FeatureMap<T> upsample_nn2_backward(const FeatureMap<T>& gout);

// Mean over all complex elements of |eps_hat - eps|^2, accumulated in double.
template <class T>
double loss_mse_complex(const FeatureMap<T>& eps, const FeatureMap<T>& eps_hat);

// d(loss)/d(eps_hat) = 2 (eps_hat - eps) / N with N the complex element count.
template <class T>
FeatureMap<T> loss_mse_complex_grad(const FeatureMap<T>& eps, const FeatureMap<T>& eps_hat);

// ============================================================================
// Residual U-Net
// ============================================================================

enum class Mode { train, eval };

struct CvUNetConfig {
  int base_channels = 8;
  int depth = 2;        // number of 2x downsamplings; spatial dims must divide 2^depth
  double dropout = 0.2; // applied on the contracting path only
  int timesteps = 50;   // T; conditions the network via a constant t/T channel
  bool zero_init_head = true;
  bool time_channel = true; // false drops the t/T channel (magnitude-only conditioning)
};

// Activation record for one forward pass.  Tensors and dropout masks are
// pushed in forward order and consumed strictly in reverse by backward.
template <class T>
struct Tape {
  std::vector<FeatureMap<T>> acts;
  std::vector<std::vector<uint8_t>> masks;

  void clear() {
    acts.clear();
    masks.clear();
  }
};

// Complex-valued residual U-Net predicting a noise field from (z_t,
// conditioning magnitude).  Input has 2 complex channels; a constant t/T
// channel is appended internally (see CvUNetConfig::time_channel).  Output
// has 1 channel with the input's spatial dims.
template <class T>
class CvUNet {
 public:
  // Builds the parameter set and initializes it from `rng`; with
  // zero_init_head the final convolution starts at exactly zero, so the
  // untrained network outputs zero everywhere.
  CvUNet(const CvUNetConfig& cfg, Rng& rng);

  const CvUNetConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  size_t param_scalar_count() const { return params_.scalar_count(); }

  // Train mode requires rng (dropout) and tape; eval mode ignores both and
  // is bit-deterministic.  1 <= t_index <= config().timesteps.
  FeatureMap<T> forward(const FeatureMap<T>& x, int t_index, Mode mode, Rng* rng = nullptr,
                        Tape<T>* tape = nullptr) const;

  // Gradients of a real loss with respect to every parameter scalar, in the
  // layout of params().  `tape` must come from the immediately preceding
  // train-mode forward.
  ParamSet<T> backward(const FeatureMap<T>& grad_out, Tape<T>& tape) const;

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
    Conv conv1, conv2, proj; // proj.widx < 0 when channels match
    Prelu prelu1, prelu2;
    bool dropout = false;
  };

  Conv add_conv(const std::string& name, int out_ch, int in_ch, int k, int stride, Rng& rng);
  Prelu add_prelu(const std::string& name, int ch);
  ResBlock add_res_block(const std::string& name, int in_ch, int out_ch, bool dropout, Rng& rng);

  FeatureMap<T> run_conv(const Conv& c, const FeatureMap<T>& x, Tape<T>* tape) const;
  FeatureMap<T> conv_back(const Conv& c, const FeatureMap<T>& gout, Tape<T>& tape,
                          ParamSet<T>& grads, bool need_gx = true) const;
  FeatureMap<T> run_prelu(const Prelu& p, const FeatureMap<T>& x, Tape<T>* tape) const;
  FeatureMap<T> prelu_back(const Prelu& p, const FeatureMap<T>& gout, Tape<T>& tape,
                           ParamSet<T>& grads) const;
  FeatureMap<T> run_dropout(const FeatureMap<T>& x, Mode mode, Rng* rng, Tape<T>* tape) const;
  FeatureMap<T> dropout_back(const FeatureMap<T>& gout, Tape<T>& tape) const;
  FeatureMap<T> run_block(const ResBlock& blk, const FeatureMap<T>& x, Mode mode, Rng* rng,
                          Tape<T>* tape) const;
  FeatureMap<T> block_back(const ResBlock& blk, const FeatureMap<T>& gout, Tape<T>& tape,
                           ParamSet<T>& grads, bool need_gx = true) const;

  CvUNetConfig cfg_;
  ParamSet<T> params_;
  ResBlock stem_;
  std::vector<Conv> down_;
  std::vector<Prelu> down_act_;
  std::vector<ResBlock> enc_;
  std::vector<Conv> up_;
  std::vector<Prelu> up_act_;
  std::vector<ResBlock> dec_;
  Conv head_;
};

// ============================================================================
// Optimizer
// ============================================================================

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double eps = 1e-8;
  double gamma = 0.995; // per-epoch learning-rate decay
};

template <class T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, const AdamConfig& cfg);

  // Standard bias-corrected update.  Non-finite gradients are rejected with
  // the offending tensor named.
  void step(ParamSet<T>& params, const ParamSet<T>& grads);

  // Called once per epoch boundary: lr *= gamma.
  void advance_epoch() { lr_ *= cfg_.gamma; }

  double learning_rate() const { return lr_; }
  long long step_count() const { return steps_; }

 private:
  AdamConfig cfg_;
  double lr_;
  long long steps_ = 0;
  ParamSet<T> m_, v_;
};

// ============================================================================
// Conversions to/from single-channel images
// ============================================================================

// Stacks single-channel images into a feature map; all shapes must match.
FeatureMap<float> stack_channels(const std::vector<const ComplexImage*>& planes);

// Extracts one channel as a ComplexImage.
ComplexImage extract_channel(const FeatureMap<float>& f, int channel);

}  // namespace phasegen::cvnn
