#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// ============================================================================
// Platform detection
// ============================================================================

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__) || defined(_M_IX86)
#define PG_SIMD_X86 1
#else
#define PG_SIMD_X86 0
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define PG_SIMD_ARM64 1
#else
#define PG_SIMD_ARM64 0
#endif

namespace phasegen::kernels {

// ============================================================================
// Dispatch
//
// Every kernel has a scalar reference implementation; on x86 an AVX2+FMA
// variant and on ARM64 a NEON variant are compiled alongside and selected
// once at runtime from CPU capabilities.  PHASEGEN_SIMD=scalar|avx2|neon|auto
// overrides the choice (requesting an unavailable ISA falls back to scalar).
// All variants agree to floating-point roundoff; the equivalence tests pin
// the bounds.
// ============================================================================

enum class Isa { scalar, avx2, neon };

Isa active_isa();
const char* isa_name(Isa isa);

// Complex spans are interleaved (re, im) float pairs; `n` counts complex
// elements.  Real spans count floats.
struct KernelTable {
  // dst[i] += w * src[i]
  void (*cmac)(float* dst, const float* src, float wr, float wi, size_t n);
  // dst[i] += src[i] at stride `step` complex elements in src
  void (*cmac_strided)(float* dst, const float* src, size_t step, float wr, float wi, size_t n);
  // sum of src[i]
  void (*csum)(const float* src, size_t n, double* re, double* im);
  // sum of conj(a[i]) * b[i]
  void (*cdotc)(const float* a, const float* b, size_t n, double* re, double* im);
  // sum of a[i]^2 over a real span
  double (*sum_sq)(const float* a, size_t n);
  // sum of (a[i] - b[i])^2 over real spans
  double (*sum_sq_diff)(const float* a, const float* b, size_t n);
  // y[i] = x[i] > 0 ? x[i] : slope * x[i] over a real span
  void (*prelu)(float* y, const float* x, float slope, size_t n);
  // gin[i] += gout[i] * (x[i] > 0 ? 1 : slope); returns sum of
  // gout[i] * x[i] over x[i] <= 0 (the slope gradient contribution)
  double (*prelu_bwd)(float* gin, const float* gout, const float* x, float slope, size_t n);
};

// Table for the active ISA (resolved once, thread-safe).
const KernelTable& active();
// Table for one specific ISA; scalar is always available.  Requesting an
// ISA this build/CPU cannot run returns the scalar table.
const KernelTable& table_for(Isa isa);

extern const KernelTable kScalarTable;
#if PG_SIMD_X86
bool cpu_has_avx2();
extern const KernelTable kAvx2Table;
#endif
#if PG_SIMD_ARM64
extern const KernelTable kNeonTable;
#endif

// ============================================================================
// Generic facade
//
// float resolves through the dispatch table; other scalar types run the
// reference loops (the double instantiation backs gradient checking).
// ============================================================================

namespace detail {

template <class T>
void cmac_ref(T* dst, const T* src, T wr, T wi, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const T a = src[2 * i], b = src[2 * i + 1];
    dst[2 * i] += a * wr - b * wi;
    dst[2 * i + 1] += a * wi + b * wr;
  }
}

template <class T>
void cmac_strided_ref(T* dst, const T* src, size_t step, T wr, T wi, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const T a = src[2 * i * step], b = src[2 * i * step + 1];
    dst[2 * i] += a * wr - b * wi;
    dst[2 * i + 1] += a * wi + b * wr;
  }
}

template <class T>
void csum_ref(const T* src, size_t n, double* re, double* im) {
  double ar = 0.0, ai = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ar += static_cast<double>(src[2 * i]);
    ai += static_cast<double>(src[2 * i + 1]);
  }
  *re = ar;
  *im = ai;
}

template <class T>
void cdotc_ref(const T* a, const T* b, size_t n, double* re, double* im) {
  double ar = 0.0, ai = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double xr = a[2 * i], xi = a[2 * i + 1];
    const double yr = b[2 * i], yi = b[2 * i + 1];
    ar += xr * yr + xi * yi;
    ai += xr * yi - xi * yr;
  }
  *re = ar;
  *im = ai;
}

template <class T>
double sum_sq_ref(const T* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double v = a[i];
    acc += v * v;
  }
  return acc;
}

template <class T>
double sum_sq_diff_ref(const T* a, const T* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <class T>
void prelu_ref(T* y, const T* x, T slope, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
double prelu_bwd_ref(T* gin, const T* gout, const T* x, T slope, size_t n) {
  double gs = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) {
      gin[i] += gout[i];
    } else {
      gin[i] += gout[i] * slope;
      gs += static_cast<double>(gout[i]) * static_cast<double>(x[i]);
    }
  }
  return gs;
}

}  // namespace detail

template <class T>
inline void cmac(T* dst, const T* src, T wr, T wi, size_t n) {
  detail::cmac_ref(dst, src, wr, wi, n);
}
template <>
inline void cmac<float>(float* dst, const float* src, float wr, float wi, size_t n) {
  active().cmac(dst, src, wr, wi, n);
}

template <class T>
inline void cmac_strided(T* dst, const T* src, size_t step, T wr, T wi, size_t n) {
  detail::cmac_strided_ref(dst, src, step, wr, wi, n);
}
template <>
inline void cmac_strided<float>(float* dst, const float* src, size_t step, float wr, float wi,
                                size_t n) {
  active().cmac_strided(dst, src, step, wr, wi, n);
}

template <class T>
inline void csum(const T* src, size_t n, double* re, double* im) {
  detail::csum_ref(src, n, re, im);
}
template <>
inline void csum<float>(const float* src, size_t n, double* re, double* im) {
  active().csum(src, n, re, im);
}

template <class T>
inline void cdotc(const T* a, const T* b, size_t n, double* re, double* im) {
  detail::cdotc_ref(a, b, n, re, im);
}
template <>
inline void cdotc<float>(const float* a, const float* b, size_t n, double* re, double* im) {
  active().cdotc(a, b, n, re, im);
}

template <class T>
inline double sum_sq(const T* a, size_t n) {
  return detail::sum_sq_ref(a, n);
}
template <>
inline double sum_sq<float>(const float* a, size_t n) {
  return active().sum_sq(a, n);
}

template <class T>
inline double sum_sq_diff(const T* a, const T* b, size_t n) {
  return detail::sum_sq_diff_ref(a, b, n);
}
template <>
inline double sum_sq_diff<float>(const float* a, const float* b, size_t n) {
  return active().sum_sq_diff(a, b, n);
}

template <class T>
inline void prelu(T* y, const T* x, T slope, size_t n) {
  detail::prelu_ref(y, x, slope, n);
}
template <>
inline void prelu<float>(float* y, const float* x, float slope, size_t n) {
  active().prelu(y, x, slope, n);
}

template <class T>
inline double prelu_bwd(T* gin, const T* gout, const T* x, T slope, size_t n) {
  return detail::prelu_bwd_ref(gin, gout, x, slope, n);
}
template <>
inline double prelu_bwd<float>(float* gin, const float* gout, const float* x, float slope,
                               size_t n) {
  return active().prelu_bwd(gin, gout, x, slope, n);
}

}  // namespace phasegen::kernels
