#include "phasegen/unwrap.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace phasegen {

namespace {

// cos(pi * (2n+1) * k / (2N)) for one axis length; row k holds the k-th
// cosine mode sampled at half-integer grid points.
std::vector<double> cosine_table(int n) {
  std::vector<double> t(static_cast<size_t>(n) * n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      t[static_cast<size_t>(k) * n + i] = std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
  return t;
}

// 5-point Laplacian with reflected boundary samples (zero normal derivative).
std::vector<double> laplacian(const std::vector<double>& f, int H, int W) {
  std::vector<double> out(f.size());
  auto at = [&](int y, int x) {
    y = std::min(std::max(y, 0), H - 1);
    x = std::min(std::max(x, 0), W - 1);
    return f[static_cast<size_t>(y) * W + x];
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      out[static_cast<size_t>(y) * W + x] =
          at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
  return out;
}

// Separable DCT-II (forward = true) or its inverse along one axis.
void dct_axis(std::vector<double>& data, int H, int W, bool along_x, bool forward,
              const std::vector<double>& table) {
  const int n = along_x ? W : H;
  const int lines = along_x ? H : W;
  std::vector<double> line(n), out(n);
  for (int l = 0; l < lines; ++l) {
    for (int i = 0; i < n; ++i)
      line[i] = along_x ? data[static_cast<size_t>(l) * W + i] : data[static_cast<size_t>(i) * W + l];
    if (forward) {
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        const double* row = table.data() + static_cast<size_t>(k) * n;
        for (int i = 0; i < n; ++i) acc += line[i] * row[i];
        out[k] = acc;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        double acc = line[0];
        for (int k = 1; k < n; ++k) acc += 2.0 * line[k] * table[static_cast<size_t>(k) * n + i];
        out[i] = acc / n;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (along_x)
        data[static_cast<size_t>(l) * W + i] = out[i];
      else
        data[static_cast<size_t>(i) * W + l] = out[i];
    }
  }
}

}  // namespace

RealGrid laplacian_unwrap(const RealGrid& wrapped) {
  validate_finite(wrapped, "wrapped phase");
  const int H = wrapped.height, W = wrapped.width;
  if (H < 1 || W < 1) throw std::invalid_argument("wrapped phase grid is empty");

  std::vector<double> s(wrapped.size()), c(wrapped.size());
  for (size_t i = 0; i < wrapped.size(); ++i) {
    s[i] = std::sin(static_cast<double>(wrapped.data[i]));
    c[i] = std::cos(static_cast<double>(wrapped.data[i]));
  }
  const std::vector<double> ls = laplacian(s, H, W);
  const std::vector<double> lc = laplacian(c, H, W);
  std::vector<double> rhs(wrapped.size());
  for (size_t i = 0; i < rhs.size(); ++i) rhs[i] = c[i] * ls[i] - s[i] * lc[i];

  // The cosine basis diagonalizes the reflected-boundary Laplacian with
  // per-axis eigenvalues 2 cos(pi k / N) - 2; the zero mode fixes the free
  // additive constant.
  const std::vector<double> tx = cosine_table(W);
  const std::vector<double> ty = H == W ? tx : cosine_table(H);
  dct_axis(rhs, H, W, true, true, tx);
  dct_axis(rhs, H, W, false, true, ty);
  for (int ky = 0; ky < H; ++ky) {
    const double ey = 2.0 * std::cos(kPi * ky / H) - 2.0;
    for (int kx = 0; kx < W; ++kx) {
      const double ex = 2.0 * std::cos(kPi * kx / W) - 2.0;
      const size_t i = static_cast<size_t>(ky) * W + kx;
      rhs[i] = (ky == 0 && kx == 0) ? 0.0 : rhs[i] / (ey + ex);
    }
  }
  dct_axis(rhs, H, W, false, false, ty);
  dct_axis(rhs, H, W, true, false, tx);

  // The smooth solution carries an arbitrary offset and small boundary
  // tilt; snapping to the nearest 2*pi congruent of the input removes both
  // while keeping the recovered wrap counts.
  double sr = 0.0, si = 0.0;
  for (size_t i = 0; i < rhs.size(); ++i) {
    const double d = rhs[i] - wrapped.data[i];
    sr += std::cos(d);
    si += std::sin(d);
  }
  const double offset = std::atan2(si, sr);
  RealGrid out(H, W);
  for (size_t i = 0; i < out.size(); ++i) {
    const double k = std::round((rhs[i] - offset - wrapped.data[i]) / (2.0 * kPi));
    out.data[i] = static_cast<float>(wrapped.data[i] + 2.0 * kPi * k);
  }
  return out;
}

}  // namespace phasegen
