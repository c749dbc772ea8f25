#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "phasegen/checkpoint.hpp"
#include "phasegen/cvnn.hpp"
#include "phasegen/rng.hpp"
#include "support.hpp"

using namespace phasegen;
using namespace phasegen::cvnn;

namespace {

template <class T>
FeatureMap<T> random_fm(int c, int h, int w, Rng& rng, double scale = 1.0) {
  FeatureMap<T> f(c, h, w);
  for (auto& v : f.data)
    v = {static_cast<T>(rng.uniform(-scale, scale)), static_cast<T>(rng.uniform(-scale, scale))};
  return f;
}

// Real inner product over split components: L = sum Re(g)Re(y) + Im(g)Im(y).
// Backward passes fed with cotangent g compute exactly dL/d(parameter).
template <class T>
double real_inner(const FeatureMap<T>& g, const FeatureMap<T>& y) {
  double acc = 0.0;
  for (size_t i = 0; i < g.data.size(); ++i) {
    acc += static_cast<double>(g.data[i].real()) * static_cast<double>(y.data[i].real());
    acc += static_cast<double>(g.data[i].imag()) * static_cast<double>(y.data[i].imag());
  }
  return acc;
}

// Brute-force same-padding complex convolution: output (oy, ox) reads the
// k x k window centered on input (stride*oy, stride*ox), accumulating w * x
// in double regardless of T.
template <class T>
FeatureMap<T> conv_oracle(const FeatureMap<T>& x, const ParamTensor<T>& w,
                          const ParamTensor<T>& b, int stride) {
  const int oc_n = static_cast<int>(w.dims[0]);
  const int ic_n = static_cast<int>(w.dims[1]);
  const int k = static_cast<int>(w.dims[2]);
  const int pad = k / 2;
  const int ho = stride == 1 ? x.height : (x.height + 1) / 2;
  const int wo = stride == 1 ? x.width : (x.width + 1) / 2;

  FeatureMap<T> out(oc_n, ho, wo);
  for (int oc = 0; oc < oc_n; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        std::complex<double> acc(b.values[2 * oc], b.values[2 * oc + 1]);
        for (int ic = 0; ic < ic_n; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = stride * oy + ky - pad;
            if (iy < 0 || iy >= x.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = stride * ox + kx - pad;
              if (ix < 0 || ix >= x.width) continue;
              const size_t wi = 2 * (((static_cast<size_t>(oc) * ic_n + ic) * k + ky) * k + kx);
              const std::complex<double> wc(w.values[wi], w.values[wi + 1]);
              acc += wc * std::complex<double>(x.at(ic, iy, ix));
            }
          }
        }
        out.at(oc, oy, ox) = std::complex<T>(static_cast<T>(acc.real()),
                                             static_cast<T>(acc.imag()));
      }
    }
  }
  return out;
}

template <class T>
double max_fm_diff(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  REQUIRE(same_dims(a, b));
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(std::complex<double>(a.data[i]) -
                                     std::complex<double>(b.data[i])));
  return worst;
}

template <class T>
bool fm_bit_equal(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (!same_dims(a, b)) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i].real() != b.data[i].real() || a.data[i].imag() != b.data[i].imag()) return false;
  return true;
}

// Central finite differences against analytic gradients over every scalar of
// `analytic`, mirrored into the matching parameter storage via `param_of`.
// Components with |analytic| <= floor are skipped (relative error on noise).
struct GradStats {
  int checked = 0;
  double worst_rel = 0.0;
};

template <class LossFn>
GradStats check_tensor_grads(std::vector<double>& param_values,
                             const std::vector<double>& analytic, LossFn loss, double h = 1e-3,
                             double floor = 1e-6) {
  GradStats stats;
  for (size_t j = 0; j < param_values.size(); ++j) {
    if (std::abs(analytic[j]) <= floor) continue;
    const double saved = param_values[j];
    param_values[j] = saved + h;
    const double up = loss();
    param_values[j] = saved - h;
    const double dn = loss();
    param_values[j] = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double rel = std::abs(fd - analytic[j]) / std::max(std::abs(fd), std::abs(analytic[j]));
    stats.worst_rel = std::max(stats.worst_rel, rel);
    ++stats.checked;
  }
  return stats;
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

TEST_CASE("complex convolution matches the per-pixel oracle") {
  Rng rng(1);
  struct Shape {
    int ic, oc, h, w, k, stride;
  };
  const Shape shapes[] = {
      {1, 1, 4, 4, 3, 1}, {1, 1, 4, 4, 1, 1}, {2, 3, 5, 6, 3, 1},
      {3, 2, 6, 6, 3, 2}, {2, 2, 5, 7, 3, 2},
  };
  for (const auto& s : shapes) {
    CAPTURE(s.ic);
    CAPTURE(s.oc);
    CAPTURE(s.stride);
    const auto x = random_fm<float>(s.ic, s.h, s.w, rng);
    auto w = make_conv_weight<float>("w", s.oc, s.ic, s.k, rng);
    auto b = make_conv_bias<float>("b", s.oc);
    for (auto& v : b.values) v = static_cast<float>(rng.uniform(-0.5, 0.5));

    const auto got = complex_conv2d(x, w, b, s.stride);
    const auto want = conv_oracle(x, w, b, s.stride);
    CHECK(max_fm_diff(got, want) < 1e-5);
  }
}

TEST_CASE("complex convolution in double matches the oracle tightly") {
  Rng rng(2);
  const auto x = random_fm<double>(2, 6, 5, rng);
  auto w = make_conv_weight<double>("w", 3, 2, 3, rng);
  const auto b = make_conv_bias<double>("b", 3);
  for (int stride : {1, 2})
    CHECK(max_fm_diff(complex_conv2d(x, w, b, stride), conv_oracle(x, w, b, stride)) < 1e-12);
}

TEST_CASE("1x1 kernels act pointwise") {
  Rng rng(3);
  const auto x = random_fm<float>(1, 4, 4, rng);
  auto w = make_conv_weight<float>("w", 1, 1, 1, rng);
  const auto b = make_conv_bias<float>("b", 1);

  // Unit weight: exact identity.
  w.values = {1.0f, 0.0f};
  CHECK(fm_bit_equal(complex_conv2d(x, w, b, 1), x));

  // Weight i rotates every sample by 90 degrees, exactly.
  w.values = {0.0f, 1.0f};
  const auto rot = complex_conv2d(x, w, b, 1);
  for (size_t i = 0; i < x.data.size(); ++i) {
    CHECK(rot.data[i].real() == -x.data[i].imag());
    CHECK(rot.data[i].imag() == x.data[i].real());
  }
}

TEST_CASE("zero weights leave only the bias") {
  Rng rng(4);
  const auto x = random_fm<float>(2, 3, 3, rng);
  auto w = make_conv_weight<float>("w", 1, 2, 3, rng);
  std::fill(w.values.begin(), w.values.end(), 0.0f);
  auto b = make_conv_bias<float>("b", 1);
  b.values = {0.5f, -2.0f};

  const auto out = complex_conv2d(x, w, b, 1);
  for (const auto& v : out.data) {
    CHECK(v.real() == 0.5f);
    CHECK(v.imag() == -2.0f);
  }
}

TEST_CASE("convolution factories validate and initialize by fan-in") {
  Rng rng(5);
  CHECK_THROWS_AS(make_conv_weight<float>("w", 1, 1, 2, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_conv_weight<float>("w", 0, 1, 3, rng), std::invalid_argument);

  // E|w|^2 = 1/(in_ch k^2); the modulus is Rayleigh so |w|^2 is exponential
  // and the sample mean over 36864 taps concentrates within a few percent.
  const auto w = make_conv_weight<float>("w", 64, 64, 3, rng);
  double acc = 0.0;
  for (size_t i = 0; i < w.elements(); ++i) {
    const double re = w.values[2 * i], im = w.values[2 * i + 1];
    acc += re * re + im * im;
  }
  const double mean = acc / static_cast<double>(w.elements());
  CHECK(mean == doctest::Approx(1.0 / (64.0 * 9.0)).epsilon(0.05));

  // Biases start at zero, slopes at 0.25.
  const auto b = make_conv_bias<float>("b", 4);
  CHECK(std::all_of(b.values.begin(), b.values.end(), [](float v) { return v == 0.0f; }));
  const auto s = make_prelu_slopes<float>("s", 3);
  CHECK(std::all_of(s.values.begin(), s.values.end(), [](float v) { return v == 0.25f; }));
}

TEST_CASE("convolution gradients pass finite differences") {
  Rng rng(6);
  for (int stride : {1, 2}) {
    CAPTURE(stride);
    const auto x = random_fm<double>(2, 5, 4, rng);
    auto w = make_conv_weight<double>("w", 3, 2, 3, rng);
    auto b = make_conv_bias<double>("b", 3);
    for (auto& v : b.values) v = rng.uniform(-0.3, 0.3);
    const auto out0 = complex_conv2d(x, w, b, stride);
    const auto g = random_fm<double>(out0.channels, out0.height, out0.width, rng);

    FeatureMap<double> gx(2, 5, 4);
    ParamTensor<double> gw;
    gw.name = w.name;
    gw.dims = w.dims;
    gw.values.assign(w.values.size(), 0.0);
    auto gb = make_conv_bias<double>("b", 3);
    complex_conv2d_backward(g, x, w, stride, &gx, gw, gb);

    const auto loss_w = [&] { return real_inner(g, complex_conv2d(x, w, b, stride)); };
    const auto sw = check_tensor_grads(w.values, gw.values, loss_w);
    CHECK(sw.checked > 50);
    CHECK(sw.worst_rel < 1e-6);  // double arithmetic leaves only fd truncation

    const auto sb = check_tensor_grads(b.values, gb.values, loss_w);
    CHECK(sb.checked == 6);
    CHECK(sb.worst_rel < 1e-6);

    // Input gradient via the same scheme over the split components.
    std::vector<double> xs(2 * x.data.size());
    std::vector<double> gxs(2 * x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
      xs[2 * i] = x.data[i].real();
      xs[2 * i + 1] = x.data[i].imag();
      gxs[2 * i] = gx.data[i].real();
      gxs[2 * i + 1] = gx.data[i].imag();
    }
    auto xcopy = x;
    const auto loss_x = [&] {
      for (size_t i = 0; i < xcopy.data.size(); ++i)
        xcopy.data[i] = {xs[2 * i], xs[2 * i + 1]};
      return real_inner(g, complex_conv2d(xcopy, w, b, stride));
    };
    const auto sx = check_tensor_grads(xs, gxs, loss_x);
    CHECK(sx.checked > 50);
    CHECK(sx.worst_rel < 1e-6);
  }
}

// ---------------------------------------------------------------------------
// PReLU
// ---------------------------------------------------------------------------

TEST_CASE("prelu scales negative components per channel") {
  FeatureMap<float> x(3, 1, 2);
  x.at(0, 0, 0) = {-2.0f, 3.0f};
  x.at(0, 0, 1) = {1.0f, -1.0f};
  x.at(1, 0, 0) = {-4.0f, -0.5f};
  x.at(1, 0, 1) = {2.0f, 0.0f};
  x.at(2, 0, 0) = {-2.0f, 3.0f};
  x.at(2, 0, 1) = {-1.0f, -8.0f};

  auto s = make_prelu_slopes<float>("s", 3);
  s.values = {1.0f, 0.0f, 0.5f};  // identity, rectifier, half-slope

  const auto y = complex_prelu(x, s);
  CHECK(y.at(0, 0, 0) == std::complex<float>(-2.0f, 3.0f));
  CHECK(y.at(0, 0, 1) == std::complex<float>(1.0f, -1.0f));
  CHECK(y.at(1, 0, 0) == std::complex<float>(0.0f, 0.0f));
  CHECK(y.at(1, 0, 1) == std::complex<float>(2.0f, 0.0f));
  CHECK(y.at(2, 0, 0) == std::complex<float>(-1.0f, 3.0f));
  CHECK(y.at(2, 0, 1) == std::complex<float>(-0.5f, -4.0f));

  auto bad = make_prelu_slopes<float>("bad", 2);
  CHECK_THROWS_AS(complex_prelu(x, bad), std::invalid_argument);
}

TEST_CASE("prelu gradients pass finite differences") {
  Rng rng(7);
  // Components bounded away from the kink so the difference quotient is
  // one-sided-safe at h = 1e-3.
  FeatureMap<double> x(2, 4, 4);
  for (auto& v : x.data) {
    const double re = rng.uniform(0.05, 1.0) * (rng.below(2) ? 1.0 : -1.0);
    const double im = rng.uniform(0.05, 1.0) * (rng.below(2) ? 1.0 : -1.0);
    v = {re, im};
  }
  auto s = make_prelu_slopes<double>("s", 2);
  s.values = {0.3, 0.7};
  const auto g = random_fm<double>(2, 4, 4, rng);

  FeatureMap<double> gx(2, 4, 4);
  auto gs = make_prelu_slopes<double>("s", 2, 0.0);
  complex_prelu_backward(g, x, s, &gx, gs);

  const auto loss_s = [&] { return real_inner(g, complex_prelu(x, s)); };
  const auto st = check_tensor_grads(s.values, gs.values, loss_s);
  CHECK(st.checked == 2);
  CHECK(st.worst_rel < 1e-9);

  std::vector<double> xs(2 * x.data.size()), gxs(2 * x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i) {
    xs[2 * i] = x.data[i].real();
    xs[2 * i + 1] = x.data[i].imag();
    gxs[2 * i] = gx.data[i].real();
    gxs[2 * i + 1] = gx.data[i].imag();
  }
  auto xc = x;
  const auto loss_x = [&] {
    for (size_t i = 0; i < xc.data.size(); ++i) xc.data[i] = {xs[2 * i], xs[2 * i + 1]};
    return real_inner(g, complex_prelu(xc, s));
  };
  const auto sx = check_tensor_grads(xs, gxs, loss_x);
  CHECK(sx.checked > 30);
  CHECK(sx.worst_rel < 1e-9);
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

TEST_CASE("dropout is the identity when inactive") {
  Rng rng(8);
  const auto x = random_fm<float>(2, 4, 4, rng);

  std::vector<uint8_t> keep;
  const auto eval_out = complex_dropout(x, 0.5, rng, false, &keep);
  CHECK(fm_bit_equal(eval_out, x));
  CHECK(std::all_of(keep.begin(), keep.end(), [](uint8_t k) { return k == 1; }));

  const auto zero_rate = complex_dropout(x, 0.0, rng, true, &keep);
  CHECK(fm_bit_equal(zero_rate, x));

  CHECK_THROWS_AS(complex_dropout(x, 1.0, rng, true, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(complex_dropout(x, -0.1, rng, true, nullptr), std::invalid_argument);
}

TEST_CASE("dropout removes whole complex samples and rescales survivors") {
  Rng rng(9);
  const double rate = 0.2;
  const auto x = random_fm<float>(2, 100, 250, rng);

  std::vector<uint8_t> keep;
  const auto y = complex_dropout(x, rate, rng, true, &keep);
  REQUIRE(keep.size() == x.size());

  const float scale = static_cast<float>(1.0 / (1.0 - rate));
  size_t kept = 0;
  double sum_in = 0.0, sum_out = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (keep[i]) {
      ++kept;
      CHECK(y.data[i].real() == x.data[i].real() * scale);
      CHECK(y.data[i].imag() == x.data[i].imag() * scale);
    } else {
      // Both components vanish together: samples drop as complex units.
      CHECK(y.data[i].real() == 0.0f);
      CHECK(y.data[i].imag() == 0.0f);
    }
    sum_in += std::abs(std::complex<double>(x.data[i]));
    sum_out += std::abs(std::complex<double>(y.data[i]));
  }
  const double kept_frac = static_cast<double>(kept) / static_cast<double>(x.size());
  CHECK(kept_frac == doctest::Approx(0.8).epsilon(0.0125));
  // The 1/(1-rate) scaling keeps the expected activation level.
  CHECK(sum_out / sum_in == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("dropout backward mirrors the forward mask") {
  Rng rng(10);
  const auto x = random_fm<float>(1, 8, 8, rng);
  std::vector<uint8_t> keep;
  (void)complex_dropout(x, 0.3, rng, true, &keep);

  const auto g = random_fm<float>(1, 8, 8, rng);
  const auto gx = complex_dropout_backward(g, keep, 0.3);
  const float scale = static_cast<float>(1.0 / 0.7);
  for (size_t i = 0; i < g.size(); ++i) {
    const std::complex<float> want = keep[i] ? g.data[i] * scale : std::complex<float>(0, 0);
    CHECK(gx.data[i] == want);
  }

  CHECK_THROWS_AS(complex_dropout_backward(g, std::vector<uint8_t>(3, 1), 0.3),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Upsampling
// ---------------------------------------------------------------------------

TEST_CASE("nearest upsampling duplicates and its backward sums blocks") {
  FeatureMap<float> x(1, 2, 3);
  for (size_t i = 0; i < x.data.size(); ++i)
    x.data[i] = {static_cast<float>(i + 1), -static_cast<float>(i + 1)};

  const auto y = upsample_nn2(x);
  REQUIRE(y.height == 4);
  REQUIRE(y.width == 6);
  for (int yy = 0; yy < 4; ++yy)
    for (int xx = 0; xx < 6; ++xx) CHECK(y.at(0, yy, xx) == x.at(0, yy / 2, xx / 2));

  Rng rng(11);
  const auto g = random_fm<double>(2, 4, 6, rng);
  const auto xd = random_fm<double>(2, 2, 3, rng);
  const auto gx = upsample_nn2_backward(g);
  // Adjoint identity <up(x), g> == <x, up_back(g)>.
  CHECK(real_inner(g, upsample_nn2(xd)) == doctest::Approx(real_inner(gx, xd)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

TEST_CASE("complex mse loss on fixed points") {
  FeatureMap<float> eps(1, 2, 2), eps_hat(1, 2, 2);
  CHECK(loss_mse_complex(eps, eps_hat) == 0.0);

  eps_hat.at(0, 0, 0) = {3.0f, 4.0f};
  CHECK(loss_mse_complex(eps, eps_hat) == doctest::Approx(25.0 / 4.0).epsilon(1e-12));

  const auto g = loss_mse_complex_grad(eps, eps_hat);
  CHECK(g.at(0, 0, 0).real() == doctest::Approx(2.0 * 3.0 / 4.0));
  CHECK(g.at(0, 0, 0).imag() == doctest::Approx(2.0 * 4.0 / 4.0));
  CHECK(g.at(0, 1, 1) == std::complex<float>(0.0f, 0.0f));

  FeatureMap<float> other(1, 2, 3);
  CHECK_THROWS_AS(loss_mse_complex(eps, other), std::invalid_argument);
  FeatureMap<float> empty;
  CHECK_THROWS_AS(loss_mse_complex(empty, empty), std::invalid_argument);
}

TEST_CASE("complex mse loss matches an elementwise reduction oracle") {
  Rng rng(12);
  const auto a = random_fm<float>(3, 9, 7, rng);
  const auto b = random_fm<float>(3, 9, 7, rng);

  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    acc += std::norm(std::complex<double>(a.data[i]) - std::complex<double>(b.data[i]));
  const double want = acc / static_cast<double>(a.data.size());
  CHECK(loss_mse_complex(a, b) == doctest::Approx(want).epsilon(1e-9));

  // Quadratic homogeneity: doubling the residual quadruples the loss.
  FeatureMap<float> zero(3, 9, 7), twice = b;
  for (auto& v : twice.data) v *= 2.0f;
  CHECK(loss_mse_complex(zero, twice) ==
        doctest::Approx(4.0 * loss_mse_complex(zero, b)).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// U-Net
// ---------------------------------------------------------------------------

namespace {

CvUNetConfig toy_cfg(int base = 4, int depth = 2, double dropout = 0.0) {
  CvUNetConfig cfg;
  cfg.base_channels = base;
  cfg.depth = depth;
  cfg.dropout = dropout;
  cfg.timesteps = 10;
  return cfg;
}

}  // namespace

TEST_CASE("unet maps 2 channels to 1 at the input resolution") {
  Rng rng(13);
  const CvUNet<float> net(toy_cfg(), rng);
  Rng data(14);

  for (auto [h, w] : {std::pair{8, 8}, std::pair{8, 16}}) {
    const auto x = random_fm<float>(2, h, w, data);
    const auto y = net.forward(x, 3, Mode::eval);
    CHECK(y.channels == 1);
    CHECK(y.height == h);
    CHECK(y.width == w);
  }
}

TEST_CASE("unet validates input shape, timestep, and train-mode plumbing") {
  Rng rng(15);
  const CvUNet<float> net(toy_cfg(), rng);
  Rng data(16);
  const auto ok = random_fm<float>(2, 8, 8, data);

  CHECK_THROWS_AS(net.forward(random_fm<float>(3, 8, 8, data), 1, Mode::eval),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.forward(random_fm<float>(2, 6, 8, data), 1, Mode::eval),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.forward(ok, 0, Mode::eval), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(ok, 11, Mode::eval), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(ok, 1, Mode::train), std::invalid_argument);

  CHECK_THROWS_AS(CvUNet<float>(toy_cfg(0), rng), std::invalid_argument);
  auto bad = toy_cfg();
  bad.dropout = 1.0;
  CHECK_THROWS_AS(CvUNet<float>(bad, rng), std::invalid_argument);
}

TEST_CASE("zero-initialized head silences the untrained network") {
  Rng rng(17);
  const CvUNet<float> net(toy_cfg(), rng);
  Rng data(18);
  const auto y = net.forward(random_fm<float>(2, 8, 8, data), 5, Mode::eval);
  CHECK(std::all_of(y.data.begin(), y.data.end(),
                    [](std::complex<float> v) { return v == std::complex<float>(0, 0); }));

  auto live_cfg = toy_cfg();
  live_cfg.zero_init_head = false;
  Rng rng2(17);
  const CvUNet<float> live(live_cfg, rng2);
  const auto y2 = live.forward(random_fm<float>(2, 8, 8, data), 5, Mode::eval);
  CHECK(std::any_of(y2.data.begin(), y2.data.end(),
                    [](std::complex<float> v) { return v != std::complex<float>(0, 0); }));
}

TEST_CASE("eval forwards are bit-deterministic") {
  auto cfg = toy_cfg();
  cfg.zero_init_head = false;
  Rng rng(19);
  const CvUNet<float> net(cfg, rng);
  Rng data(20);
  const auto x = random_fm<float>(2, 8, 8, data);
  CHECK(fm_bit_equal(net.forward(x, 2, Mode::eval), net.forward(x, 2, Mode::eval)));
}

TEST_CASE("dropout-free training equals evaluation, droppy training does not") {
  auto cfg = toy_cfg(4, 2, 0.0);
  cfg.zero_init_head = false;
  Rng rng(21);
  const CvUNet<float> net(cfg, rng);
  Rng data(22);
  const auto x = random_fm<float>(2, 8, 8, data);

  Rng drops(23);
  Tape<float> tape;
  CHECK(fm_bit_equal(net.forward(x, 2, Mode::train, &drops, &tape),
                     net.forward(x, 2, Mode::eval)));

  auto droppy_cfg = toy_cfg(4, 2, 0.5);
  droppy_cfg.zero_init_head = false;
  Rng rng2(21);
  const CvUNet<float> droppy(droppy_cfg, rng2);
  Rng d1(24), d2(24), d3(25);
  Tape<float> t1, t2, t3;
  const auto a = droppy.forward(x, 2, Mode::train, &d1, &t1);
  const auto b = droppy.forward(x, 2, Mode::train, &d2, &t2);
  const auto c = droppy.forward(x, 2, Mode::train, &d3, &t3);
  CHECK(fm_bit_equal(a, b));        // same dropout stream
  CHECK_FALSE(fm_bit_equal(a, c));  // different dropout stream
}

TEST_CASE("the timestep channel conditions the output") {
  auto cfg = toy_cfg();
  cfg.zero_init_head = false;
  Rng rng(26);
  const CvUNet<float> net(cfg, rng);
  Rng data(27);
  const auto x = random_fm<float>(2, 8, 8, data);
  CHECK_FALSE(fm_bit_equal(net.forward(x, 1, Mode::eval), net.forward(x, 10, Mode::eval)));

  auto flat_cfg = cfg;
  flat_cfg.time_channel = false;
  Rng rng2(26);
  const CvUNet<float> flat(flat_cfg, rng2);
  CHECK(fm_bit_equal(flat.forward(x, 1, Mode::eval), flat.forward(x, 10, Mode::eval)));
}

TEST_CASE("toy parameter census is frozen") {
  Rng rng(28);
  const CvUNet<float> net(toy_cfg(8, 2), rng);
  // base 8, depth 2, 3 input channels: 41449 complex parameters stored as
  // 82898 scalars, plus 232 real slopes.
  CHECK(net.param_scalar_count() == 83130);

  const auto& p = net.params();
  CHECK(p.find("stem.conv1.weight") != nullptr);
  CHECK(p.find("stem.proj.weight") != nullptr);  // 3 -> 8 needs projection
  CHECK(p.find("enc0.proj.weight") == nullptr);  // matched channels skip it
  CHECK(p.find("enc1.conv2.bias") != nullptr);
  CHECK(p.find("dec0.prelu2.slope") != nullptr);
  CHECK(p.find("head.weight") != nullptr);
  CHECK(p.find("nonesuch") == nullptr);
}

TEST_CASE("composed unet gradients pass finite differences") {
  auto cfg = toy_cfg(2, 2, 0.0);
  cfg.zero_init_head = false;  // a zero head would zero every upstream gradient
  Rng rng(29);
  CvUNet<double> net(cfg, rng);

  // Identity slopes remove the activation creases: perturbing an early weight
  // by h otherwise pushes downstream pre-activations across a kink and the
  // difference quotient stops being a derivative.  The branch logic itself is
  // pinned by the dedicated activation gradient test above.
  for (auto& item : net.params().items)
    if (item.name.find("slope") != std::string::npos)
      for (auto& v : item.values) v = 1.0;

  Rng data(30);
  const auto x = random_fm<double>(2, 8, 8, data);
  const auto target = random_fm<double>(1, 8, 8, data);
  const int t = 4;

  Rng drops(31);
  Tape<double> tape;
  const auto out = net.forward(x, t, Mode::train, &drops, &tape);
  const auto grads = net.backward(loss_mse_complex_grad(target, out), tape);

  // Dropout is off, so eval-mode forwards reproduce the training function
  // for the difference quotients.
  const auto loss = [&] { return loss_mse_complex(target, net.forward(x, t, Mode::eval)); };

  size_t total_checked = 0;
  double worst = 0.0;
  for (size_t i = 0; i < net.params().items.size(); ++i) {
    auto& pv = net.params().items[i].values;
    const auto& gv = grads.items[i].values;
    CAPTURE(net.params().items[i].name);
    const auto st = check_tensor_grads(pv, gv, loss);
    worst = std::max(worst, st.worst_rel);
    total_checked += st.checked;
  }
  CHECK(total_checked > 4000);  // the sweep must not silently degenerate
  CHECK(worst < 1e-3);
}

TEST_CASE("backward rejects a stale activation record") {
  auto cfg = toy_cfg(2, 2, 0.0);
  Rng rng(32);
  CvUNet<float> net(cfg, rng);
  Rng data(33), drops(34);
  const auto x = random_fm<float>(2, 8, 8, data);

  Tape<float> tape;
  const auto out = net.forward(x, 1, Mode::train, &drops, &tape);
  const auto g = loss_mse_complex_grad(random_fm<float>(1, 8, 8, data), out);
  (void)net.backward(g, tape);          // consumes the record
  CHECK_THROWS_AS(net.backward(g, tape), std::logic_error);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

namespace {

ParamSet<double> single_param(double value) {
  ParamSet<double> p;
  ParamTensor<double> t;
  t.name = "theta";
  t.dims = {1};
  t.complex_valued = false;
  t.values = {value};
  p.items.push_back(std::move(t));
  return p;
}

}  // namespace

TEST_CASE("adam first step follows the bias-corrected closed form") {
  AdamConfig cfg;
  cfg.lr = 1e-3;
  auto params = single_param(1.0);
  Adam<double> opt(params, cfg);

  auto grads = single_param(0.0);
  grads.items[0].values[0] = 2.0;
  opt.step(params, grads);

  // m-hat = g, v-hat = g^2, so the move is lr * g / (|g| + eps) ~ lr.
  const double want = 1.0 - cfg.lr * 2.0 / (2.0 + cfg.eps);
  CHECK(params.items[0].values[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  auto params = single_param(0.75);
  Adam<double> opt(params, AdamConfig{});
  const auto grads = single_param(0.0);
  for (int i = 0; i < 5; ++i) opt.step(params, grads);
  CHECK(params.items[0].values[0] == 0.75);
}

TEST_CASE("adam decays the learning rate per epoch") {
  AdamConfig cfg;
  cfg.lr = 2e-3;
  cfg.gamma = 0.995;
  auto params = single_param(0.0);
  Adam<double> opt(params, cfg);
  CHECK(opt.learning_rate() == 2e-3);
  opt.advance_epoch();
  opt.advance_epoch();
  CHECK(opt.learning_rate() == doctest::Approx(2e-3 * 0.995 * 0.995).epsilon(1e-15));
}

TEST_CASE("adam rejects non-finite gradients by tensor name") {
  auto params = single_param(0.0);
  Adam<double> opt(params, AdamConfig{});
  auto grads = single_param(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_WITH_AS(opt.step(params, grads), doctest::Contains("theta"),
                       std::invalid_argument);
}

TEST_CASE("parameter set arithmetic preserves layout") {
  Rng rng(35);
  CvUNet<float> net(toy_cfg(2, 1), rng);
  auto z = zeros_like(net.params());
  REQUIRE(z.items.size() == net.params().items.size());
  for (size_t i = 0; i < z.items.size(); ++i) {
    CHECK(z.items[i].name == net.params().items[i].name);
    CHECK(z.items[i].dims == net.params().items[i].dims);
    CHECK(std::all_of(z.items[i].values.begin(), z.items[i].values.end(),
                      [](float v) { return v == 0.0f; }));
  }

  accumulate_scaled(z, net.params(), 0.5f);
  accumulate_scaled(z, net.params(), 0.5f);
  for (size_t i = 0; i < z.items.size(); ++i)
    for (size_t j = 0; j < z.items[i].values.size(); ++j)
      CHECK(z.items[i].values[j] == doctest::Approx(net.params().items[i].values[j]));
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

TEST_CASE("checkpoints reload bit-exactly and reproduce eval outputs") {
  const std::string dir = testutil::scratch_dir("ckpt");
  auto cfg = toy_cfg(4, 2);
  cfg.zero_init_head = false;
  Rng rng(36);
  CvUNet<float> net(cfg, rng);
  save_checkpoint(net.params(), dir);

  // Manifest lists every tensor in parameter order.
  const auto manifest = testutil::slurp(dir + "/params.tsv");
  const std::string text(manifest.begin(), manifest.end());
  CHECK(text.find("stem.conv1.weight") != std::string::npos);
  CHECK(text.find("head.bias") != std::string::npos);

  const ParamSet<float> loaded = load_checkpoint(dir);
  REQUIRE(loaded.items.size() == net.params().items.size());
  for (size_t i = 0; i < loaded.items.size(); ++i) {
    CHECK(loaded.items[i].name == net.params().items[i].name);
    CHECK(loaded.items[i].dims == net.params().items[i].dims);
    CHECK(loaded.items[i].complex_valued == net.params().items[i].complex_valued);
    CHECK(loaded.items[i].values == net.params().items[i].values);
  }

  // A fresh net with different init matches after load_checkpoint_into.
  Rng rng2(99);
  CvUNet<float> other(cfg, rng2);
  load_checkpoint_into(other.params(), dir);
  Rng data(37);
  const auto x = random_fm<float>(2, 8, 8, data);
  CHECK(fm_bit_equal(net.forward(x, 3, Mode::eval), other.forward(x, 3, Mode::eval)));
}

TEST_CASE("checkpoint loading rejects layout drift") {
  const std::string dir = testutil::scratch_dir("ckpt_drift");
  Rng rng(38);
  CvUNet<float> net(toy_cfg(2, 1), rng);
  save_checkpoint(net.params(), dir);

  // Different architecture: tensor list disagrees.
  Rng rng2(39);
  CvUNet<float> deeper(toy_cfg(2, 2), rng2);
  CHECK_THROWS(load_checkpoint_into(deeper.params(), dir));

  CHECK_THROWS(load_checkpoint(testutil::scratch_dir("ckpt_missing")));
}

// ---------------------------------------------------------------------------
// Channel stacking
// ---------------------------------------------------------------------------

TEST_CASE("stack and extract are inverse channel views") {
  Rng rng(40);
  const ComplexImage a = testutil::random_image(6, 5, rng);
  const ComplexImage b = testutil::random_image(6, 5, rng);

  const auto f = stack_channels({&a, &b});
  REQUIRE(f.channels == 2);
  CHECK(testutil::bit_equal(extract_channel(f, 0), a));
  CHECK(testutil::bit_equal(extract_channel(f, 1), b));
  CHECK_THROWS_AS(extract_channel(f, 2), std::invalid_argument);

  const ComplexImage odd = testutil::random_image(4, 5, rng);
  CHECK_THROWS_AS(stack_channels({&a, &odd}), std::invalid_argument);
  CHECK_THROWS_AS(stack_channels({}), std::invalid_argument);
}
