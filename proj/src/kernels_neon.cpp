#include "phasegen/kernels.hpp"

// ============================================================================
// NEON kernels (ARM64)
//
// Interleaved complex floats, 2 complex elements per 128-bit vector.
// Mirrors the AVX2 variant: f64 lanes for reduction products, vector main
// loop plus scalar remainder.
// ============================================================================

#if PG_SIMD_ARM64

#include <arm_neon.h>

namespace phasegen::kernels {

namespace {

void cmac_neon(float* dst, const float* src, float wr, float wi, size_t n) {
  const float32x4_t vwr = vdupq_n_f32(wr);
  const float wi_s[4] = {-wi, wi, -wi, wi};
  const float32x4_t vwi = vld1q_f32(wi_s);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float32x4_t x = vld1q_f32(src + 2 * i);
    const float32x4_t sw = vrev64q_f32(x);
    float32x4_t y = vld1q_f32(dst + 2 * i);
    y = vfmaq_f32(y, x, vwr);
    y = vfmaq_f32(y, sw, vwi);
    vst1q_f32(dst + 2 * i, y);
  }
  for (; i < n; ++i) {
    const float a = src[2 * i], b = src[2 * i + 1];
    dst[2 * i] += a * wr - b * wi;
    dst[2 * i + 1] += a * wi + b * wr;
  }
}

void csum_neon(const float* src, size_t n, double* re, double* im) {
  float64x2_t acc = vdupq_n_f64(0.0);  // [re, im]
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float32x4_t x = vld1q_f32(src + 2 * i);
    acc = vaddq_f64(acc, vcvt_f64_f32(vget_low_f32(x)));
    acc = vaddq_f64(acc, vcvt_f64_f32(vget_high_f32(x)));
  }
  double ar = vgetq_lane_f64(acc, 0);
  double ai = vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) {
    ar += static_cast<double>(src[2 * i]);
    ai += static_cast<double>(src[2 * i + 1]);
  }
  *re = ar;
  *im = ai;
}

void cdotc_neon(const float* a, const float* b, size_t n, double* re, double* im) {
  const double sg[2] = {-1.0, 1.0};
  const float64x2_t signs = vld1q_f64(sg);
  float64x2_t acc_re = vdupq_n_f64(0.0);
  float64x2_t acc_im = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float32x4_t xa = vld1q_f32(a + 2 * i);
    const float32x4_t xb = vld1q_f32(b + 2 * i);
    const float32x4_t sa = vrev64q_f32(xa);
    const float64x2_t a_lo = vcvt_f64_f32(vget_low_f32(xa));
    const float64x2_t a_hi = vcvt_f64_f32(vget_high_f32(xa));
    const float64x2_t b_lo = vcvt_f64_f32(vget_low_f32(xb));
    const float64x2_t b_hi = vcvt_f64_f32(vget_high_f32(xb));
    const float64x2_t s_lo = vcvt_f64_f32(vget_low_f32(sa));
    const float64x2_t s_hi = vcvt_f64_f32(vget_high_f32(sa));
    acc_re = vfmaq_f64(acc_re, a_lo, b_lo);
    acc_re = vfmaq_f64(acc_re, a_hi, b_hi);
    acc_im = vfmaq_f64(acc_im, vmulq_f64(s_lo, b_lo), signs);
    acc_im = vfmaq_f64(acc_im, vmulq_f64(s_hi, b_hi), signs);
  }
  double ar = vaddvq_f64(acc_re);
  double ai = vaddvq_f64(acc_im);
  for (; i < n; ++i) {
    const double xr = a[2 * i], xi = a[2 * i + 1];
    const double yr = b[2 * i], yi = b[2 * i + 1];
    ar += xr * yr + xi * yi;
    ai += xr * yi - xi * yr;
  }
  *re = ar;
  *im = ai;
}

double sum_sq_neon(const float* a, size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t x = vld1q_f32(a + i);
    const float64x2_t lo = vcvt_f64_f32(vget_low_f32(x));
    const float64x2_t hi = vcvt_f64_f32(vget_high_f32(x));
    acc = vfmaq_f64(acc, lo, lo);
    acc = vfmaq_f64(acc, hi, hi);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double v = a[i];
    s += v * v;
  }
  return s;
}

double sum_sq_diff_neon(const float* a, const float* b, size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xa = vld1q_f32(a + i);
    const float32x4_t xb = vld1q_f32(b + i);
    const float64x2_t d_lo = vsubq_f64(vcvt_f64_f32(vget_low_f32(xa)), vcvt_f64_f32(vget_low_f32(xb)));
    const float64x2_t d_hi =
        vsubq_f64(vcvt_f64_f32(vget_high_f32(xa)), vcvt_f64_f32(vget_high_f32(xb)));
    acc = vfmaq_f64(acc, d_lo, d_lo);
    acc = vfmaq_f64(acc, d_hi, d_hi);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

void prelu_neon(float* y, const float* x, float slope, size_t n) {
  const float32x4_t vs = vdupq_n_f32(slope);
  const float32x4_t zero = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    const uint32x4_t pos = vcgtq_f32(v, zero);
    vst1q_f32(y + i, vbslq_f32(pos, v, vmulq_f32(v, vs)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

double prelu_bwd_neon(float* gin, const float* gout, const float* x, float slope, size_t n) {
  const float32x4_t vs = vdupq_n_f32(slope);
  const float32x4_t zero = vdupq_n_f32(0.0f);
  float64x2_t acc = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t vx = vld1q_f32(x + i);
    const float32x4_t vg = vld1q_f32(gout + i);
    const uint32x4_t pos = vcgtq_f32(vx, zero);
    const float32x4_t gi = vbslq_f32(pos, vg, vmulq_f32(vg, vs));
    vst1q_f32(gin + i, vaddq_f32(vld1q_f32(gin + i), gi));
    const float32x4_t sel = vbslq_f32(pos, zero, vg);
    acc = vfmaq_f64(acc, vcvt_f64_f32(vget_low_f32(sel)), vcvt_f64_f32(vget_low_f32(vx)));
    acc = vfmaq_f64(acc, vcvt_f64_f32(vget_high_f32(sel)), vcvt_f64_f32(vget_high_f32(vx)));
  }
  double gs = vaddvq_f64(acc);
  for (; i < n; ++i) {
    if (x[i] > 0.0f) {
      gin[i] += gout[i];
    } else {
      gin[i] += gout[i] * slope;
      gs += static_cast<double>(gout[i]) * static_cast<double>(x[i]);
    }
  }
  return gs;
}

void cmac_strided_neon(float* dst, const float* src, size_t step, float wr, float wi, size_t n) {
  detail::cmac_strided_ref(dst, src, step, wr, wi, n);
}

}  // namespace

const KernelTable kNeonTable = {
    cmac_neon,   cmac_strided_neon, csum_neon,  cdotc_neon,
    sum_sq_neon, sum_sq_diff_neon,  prelu_neon, prelu_bwd_neon,
};

}  // namespace phasegen::kernels

#endif  // PG_SIMD_ARM64
