#include "phasegen/kernels.hpp"

// ============================================================================
// Scalar reference kernels
//
// These define the semantics every SIMD variant must reproduce: float
// arithmetic for element maps, f64 accumulation for reductions.
// ============================================================================

namespace phasegen::kernels {

namespace {

void cmac_scalar(float* dst, const float* src, float wr, float wi, size_t n) {
  detail::cmac_ref(dst, src, wr, wi, n);
}

void cmac_strided_scalar(float* dst, const float* src, size_t step, float wr, float wi, size_t n) {
  detail::cmac_strided_ref(dst, src, step, wr, wi, n);
}

void csum_scalar(const float* src, size_t n, double* re, double* im) {
  detail::csum_ref(src, n, re, im);
}

void cdotc_scalar(const float* a, const float* b, size_t n, double* re, double* im) {
  detail::cdotc_ref(a, b, n, re, im);
}

double sum_sq_scalar(const float* a, size_t n) { return detail::sum_sq_ref(a, n); }

double sum_sq_diff_scalar(const float* a, const float* b, size_t n) {
  return detail::sum_sq_diff_ref(a, b, n);
}

void prelu_scalar(float* y, const float* x, float slope, size_t n) {
  detail::prelu_ref(y, x, slope, n);
}

double prelu_bwd_scalar(float* gin, const float* gout, const float* x, float slope, size_t n) {
  return detail::prelu_bwd_ref(gin, gout, x, slope, n);
}

}  // namespace

const KernelTable kScalarTable = {
    cmac_scalar,   cmac_strided_scalar, csum_scalar,  cdotc_scalar,
    sum_sq_scalar, sum_sq_diff_scalar,  prelu_scalar, prelu_bwd_scalar,
};

}  // namespace phasegen::kernels
