#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "phasegen/kspace.hpp"

namespace phasegen {

namespace {

using cdouble = std::complex<double>;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 transform; dir = -1 forward, +1 inverse (unnormalized).
struct Pow2Plan {
  size_t n = 0;
  std::vector<uint32_t> bitrev;
  std::vector<cdouble> roots_fwd;  // exp(-2*pi*i*k/n), k < n/2
  std::vector<cdouble> roots_inv;

  explicit Pow2Plan(size_t size) : n(size) {
    bitrev.resize(n);
    uint32_t bits = 0;
    while ((size_t(1) << bits) < n) ++bits;
    for (size_t i = 0; i < n; ++i) {
      uint32_t r = 0;
      for (uint32_t b = 0; b < bits; ++b) {
        if (i & (size_t(1) << b)) r |= uint32_t(1) << (bits - 1 - b);
      }
      bitrev[i] = r;
    }
    roots_fwd.resize(n / 2);
    roots_inv.resize(n / 2);
    for (size_t k = 0; k < n / 2; ++k) {
      const double a = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      roots_fwd[k] = cdouble(std::cos(a), -std::sin(a));
      roots_inv[k] = cdouble(std::cos(a), std::sin(a));
    }
  }

  void run(cdouble* x, int dir) const {
    const auto& roots = dir < 0 ? roots_fwd : roots_inv;
    for (size_t i = 0; i < n; ++i) {
      const size_t j = bitrev[i];
      if (i < j) std::swap(x[i], x[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
      const size_t stride = n / len;
      for (size_t base = 0; base < n; base += len) {
        for (size_t k = 0; k < len / 2; ++k) {
          const cdouble w = roots[k * stride];
          const cdouble u = x[base + k];
          const cdouble v = x[base + k + len / 2] * w;
          x[base + k] = u + v;
          x[base + k + len / 2] = u - v;
        }
      }
    }
  }
};

// Bluestein re-expression of an arbitrary-length DFT as a power-of-two
// convolution.  Chirp angles use n^2 mod 2N to stay exact for large n.
struct BluesteinPlan {
  size_t n = 0;
  size_t m = 0;
  std::vector<cdouble> chirp_fwd;  // exp(-i*pi*k^2/n)
  std::vector<cdouble> chirp_inv;
  std::vector<cdouble> b_fwd;  // FFT of the conjugate chirp, padded to m
  std::vector<cdouble> b_inv;
  const Pow2Plan* pad_plan = nullptr;

  BluesteinPlan(size_t size, const Pow2Plan* pad) : n(size), m(pad->n), pad_plan(pad) {
    chirp_fwd.resize(n);
    chirp_inv.resize(n);
    for (size_t k = 0; k < n; ++k) {
      const uint64_t sq = (static_cast<uint64_t>(k) * k) % (2 * n);
      const double a = kPi * static_cast<double>(sq) / static_cast<double>(n);
      chirp_fwd[k] = cdouble(std::cos(a), -std::sin(a));
      chirp_inv[k] = cdouble(std::cos(a), std::sin(a));
    }
    b_fwd.assign(m, cdouble(0, 0));
    b_inv.assign(m, cdouble(0, 0));
    for (size_t k = 0; k < n; ++k) {
      b_fwd[k] = std::conj(chirp_fwd[k]);
      b_inv[k] = std::conj(chirp_inv[k]);
      if (k != 0) {
        b_fwd[m - k] = std::conj(chirp_fwd[k]);
        b_inv[m - k] = std::conj(chirp_inv[k]);
      }
    }
    pad_plan->run(b_fwd.data(), -1);
    pad_plan->run(b_inv.data(), -1);
  }

  void run(cdouble* x, int dir) const {
    const auto& chirp = dir < 0 ? chirp_fwd : chirp_inv;
    const auto& b = dir < 0 ? b_fwd : b_inv;
    std::vector<cdouble> a(m, cdouble(0, 0));
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    pad_plan->run(a.data(), -1);
    for (size_t k = 0; k < m; ++k) a[k] *= b[k];
    pad_plan->run(a.data(), +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) x[k] = a[k] * inv_m * chirp[k];
  }
};

class PlanCache {
 public:
  const Pow2Plan& pow2(size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pow2_.find(n);
    if (it == pow2_.end()) it = pow2_.emplace(n, std::make_unique<Pow2Plan>(n)).first;
    return *it->second;
  }

  const BluesteinPlan& bluestein(size_t n) {
    const Pow2Plan& pad = pow2(next_pow2(2 * n - 1));
    std::lock_guard<std::mutex> lock(mu_);
    auto it = blu_.find(n);
    if (it == blu_.end()) it = blu_.emplace(n, std::make_unique<BluesteinPlan>(n, &pad)).first;
    return *it->second;
  }

 private:
  std::mutex mu_;
  std::unordered_map<size_t, std::unique_ptr<Pow2Plan>> pow2_;
  std::unordered_map<size_t, std::unique_ptr<BluesteinPlan>> blu_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void dft_1d(cdouble* x, size_t n, int dir) {
  if (n == 1) return;
  if (is_pow2(n)) {
    cache().pow2(n).run(x, dir);
  } else {
    cache().bluestein(n).run(x, dir);
  }
}

// Centered transform core.  ifftshift maps center floor(N/2) to index 0
// before the DFT; fftshift moves it back after.  Both folds are realized
// as index rotations while copying rows/columns.
ComplexImage fft2_centered(const ComplexImage& z, int dir) {
  validate_finite(z, dir < 0 ? "fft2c" : "ifft2c");
  const int h = z.height, w = z.width;
  if (h <= 0 || w <= 0) throw std::invalid_argument("fft2c: empty image");
  const int sh_in_y = h / 2, sh_in_x = w / 2;  // ifftshift rotation amounts
  const int sh_out_y = (h - h / 2) % h;        // fftshift rotation amount

  std::vector<cdouble> row(w);
  std::vector<cdouble> col(h);
  std::vector<cdouble> buf(static_cast<size_t>(h) * w);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const cfloat v = z.at(y, x);
      row[x] = cdouble(v.real(), v.imag());
    }
    std::rotate(row.begin(), row.begin() + sh_in_x, row.end());
    dft_1d(row.data(), w, dir);
    for (int x = 0; x < w; ++x) buf[static_cast<size_t>(y) * w + x] = row[x];
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = buf[static_cast<size_t>(y) * w + x];
    std::rotate(col.begin(), col.begin() + sh_in_y, col.end());
    dft_1d(col.data(), h, dir);
    std::rotate(col.begin(), col.begin() + sh_out_y, col.end());
    for (int y = 0; y < h; ++y) buf[static_cast<size_t>(y) * w + x] = col[y];
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * static_cast<double>(w));
  ComplexImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const cdouble v = buf[static_cast<size_t>(y) * w + x] * scale;
      // fftshift along x folded into the store index: pushing element j to
      // j + floor(w/2) realizes out[i] = in[(i + w - floor(w/2)) mod w].
      const int xo = (x + sh_in_x) % w;
      out.at(y, xo) = cfloat(static_cast<float>(v.real()), static_cast<float>(v.imag()));
    }
  }
  return out;
}

}  // namespace

ComplexImage fft2c(const ComplexImage& z) { return fft2_centered(z, -1); }

ComplexImage ifft2c(const ComplexImage& z) { return fft2_centered(z, +1); }

}  // namespace phasegen
