#pragma once

#include <optional>
#include <string>

#include "phasegen/image.hpp"

namespace phasegen {

// Mean of (pred - ref)^2.
double mse(const RealGrid& ref, const RealGrid& pred);

// ||ref - pred||_2 / ||ref||_2.  An all-zero reference is rejected.
double nrmse(const RealGrid& ref, const RealGrid& pred);

// 20 log10(max(ref) / sqrt(mse)), in dB.  Identical inputs give +infinity;
// a reference with max <= 0 is rejected.
double psnr(const RealGrid& ref, const RealGrid& pred);

// Structural similarity in percent.  Local statistics use 7x7 uniform
// windows fully inside the grid; the stabilizers derive from the reference's
// dynamic range (k1 = 0.01, k2 = 0.03), so the score is asymmetric between
// ref and pred in general.  A constant reference (zero range) is rejected.
double ssim(const RealGrid& ref, const RealGrid& pred);

// Dice overlap in percent: 2|a n b| / (|a| + |b|) * 100.  Two empty masks
// agree vacuously and score 100.
double dice(const BinaryMask& a, const BinaryMask& b);

// Exact symmetric Hausdorff distance in pixels under Euclidean distance.
// Both masks must be non-empty.
double hausdorff(const BinaryMask& a, const BinaryMask& b);

// sqrt(mean over mask of wrap(a - b)^2) with differences wrapped to
// (-pi, pi].  The mask must select at least one pixel.
double circular_rmse(const RealGrid& phase_a, const RealGrid& phase_b, const BinaryMask& mask);

// One row of reconstruction metrics; absent values serialize as blank
// columns, infinite psnr as "inf".
struct MetricReport {
  std::optional<double> ssim;
  std::optional<double> psnr;
  std::optional<double> mse;
  std::optional<double> nrmse;
  std::optional<double> dsc;
  std::optional<double> hd;
  std::optional<double> circ_rmse;

  static std::string csv_header();  // "ssim,psnr,mse,nrmse,dsc,hd,circ_rmse"
  std::string csv_row() const;
};

}  // namespace phasegen
