#include "phasegen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include "phasegen/kernels.hpp"

namespace phasegen {

namespace {

void check_same_shape(const RealGrid& a, const RealGrid& b, const char* what) {
  if (!same_shape(a, b))
    throw std::invalid_argument(std::string(what) + ": grids have different shapes");
  if (a.size() == 0) throw std::invalid_argument(std::string(what) + ": grids are empty");
}

// Summed-area table with a zero top row and left column: S(y, x) holds the
// sum over the y x x top-left rectangle.
std::vector<double> integral_image(const RealGrid& g, const RealGrid* h) {
  const int H = g.height, W = g.width;
  std::vector<double> s(static_cast<size_t>(H + 1) * (W + 1), 0.0);
  for (int y = 0; y < H; ++y) {
    double row = 0.0;
    for (int x = 0; x < W; ++x) {
      const double v =
          h ? static_cast<double>(g.at(y, x)) * h->at(y, x) : static_cast<double>(g.at(y, x));
      row += v;
      s[static_cast<size_t>(y + 1) * (W + 1) + (x + 1)] =
          s[static_cast<size_t>(y) * (W + 1) + (x + 1)] + row;
    }
  }
  return s;
}

double window_sum(const std::vector<double>& s, int W, int y, int x, int k) {
  const size_t stride = static_cast<size_t>(W + 1);
  return s[(y + k) * stride + (x + k)] - s[y * stride + (x + k)] - s[(y + k) * stride + x] +
         s[y * stride + x];
}

}  // namespace

double mse(const RealGrid& ref, const RealGrid& pred) {
  check_same_shape(ref, pred, "mse");
  return kernels::sum_sq_diff<float>(ref.data.data(), pred.data.data(), ref.size()) /
         static_cast<double>(ref.size());
}

double nrmse(const RealGrid& ref, const RealGrid& pred) {
  check_same_shape(ref, pred, "nrmse");
  const double num = kernels::sum_sq_diff<float>(ref.data.data(), pred.data.data(), ref.size());
  const double den = kernels::sum_sq<float>(ref.data.data(), ref.size());
  if (den == 0.0) throw std::invalid_argument("nrmse: reference is identically zero");
  return std::sqrt(num / den);
}

double psnr(const RealGrid& ref, const RealGrid& pred) {
  check_same_shape(ref, pred, "psnr");
  const float peak = *std::max_element(ref.data.begin(), ref.data.end());
  if (!(peak > 0.0f)) throw std::invalid_argument("psnr: reference maximum must be positive");
  const double m = mse(ref, pred);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(static_cast<double>(peak) / std::sqrt(m));
}

double ssim(const RealGrid& ref, const RealGrid& pred) {
  check_same_shape(ref, pred, "ssim");
  constexpr int kWin = 7;
  if (ref.height < kWin || ref.width < kWin)
    throw std::invalid_argument("ssim: grids smaller than the 7x7 window");
  const auto [lo, hi] = std::minmax_element(ref.data.begin(), ref.data.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (range <= 0.0) throw std::invalid_argument("ssim: reference has zero dynamic range");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  const auto sa = integral_image(ref, nullptr);
  const auto sb = integral_image(pred, nullptr);
  const auto saa = integral_image(ref, &ref);
  const auto sbb = integral_image(pred, &pred);
  const auto sab = integral_image(ref, &pred);

  const double n = kWin * kWin;
  const int W = ref.width;
  double total = 0.0;
  long long count = 0;
  for (int y = 0; y + kWin <= ref.height; ++y) {
    for (int x = 0; x + kWin <= ref.width; ++x) {
      const double ma = window_sum(sa, W, y, x, kWin) / n;
      const double mb = window_sum(sb, W, y, x, kWin) / n;
      const double va = window_sum(saa, W, y, x, kWin) / n - ma * ma;
      const double vb = window_sum(sbb, W, y, x, kWin) / n - mb * mb;
      const double cab = window_sum(sab, W, y, x, kWin) / n - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return 100.0 * total / static_cast<double>(count);
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("dice: masks have different shapes");
  long long na = 0, nb = 0, nab = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    na += a.data[i] != 0;
    nb += b.data[i] != 0;
    nab += (a.data[i] != 0) && (b.data[i] != 0);
  }
  if (na + nb == 0) return 100.0; // vacuous agreement
  return 200.0 * static_cast<double>(nab) / static_cast<double>(na + nb);
}

double hausdorff(const BinaryMask& a, const BinaryMask& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("hausdorff: masks have different shapes");
  struct Pt {
    int y, x;
  };
  auto points = [](const BinaryMask& m) {
    std::vector<Pt> pts;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(y, x)) pts.push_back({y, x});
    return pts;
  };
  const std::vector<Pt> pa = points(a), pb = points(b);
  if (pa.empty() || pb.empty()) throw std::invalid_argument("hausdorff: empty mask");
  auto directed = [](const std::vector<Pt>& from, const std::vector<Pt>& to) {
    long long worst = 0;
    for (const Pt& p : from) {
      long long best = std::numeric_limits<long long>::max();
      for (const Pt& q : to) {
        const long long dy = p.y - q.y, dx = p.x - q.x;
        best = std::min(best, dy * dy + dx * dx);
        if (best == 0) break;
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::sqrt(static_cast<double>(std::max(directed(pa, pb), directed(pb, pa))));
}

double circular_rmse(const RealGrid& phase_a, const RealGrid& phase_b, const BinaryMask& mask) {
  check_same_shape(phase_a, phase_b, "circular_rmse");
  if (mask.height != phase_a.height || mask.width != phase_a.width)
    throw std::invalid_argument("circular_rmse: mask shape mismatch");
  double acc = 0.0;
  long long count = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask.data[i]) continue;
    const double d = wrap_phase(static_cast<double>(phase_a.data[i]) - phase_b.data[i]);
    acc += d * d;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("circular_rmse: mask selects no pixels");
  return std::sqrt(acc / static_cast<double>(count));
}

std::string MetricReport::csv_header() { return "ssim,psnr,mse,nrmse,dsc,hd,circ_rmse"; }

std::string MetricReport::csv_row() const {
  auto cell = [](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", *v);
    return buf;
  };
  return cell(ssim) + "," + cell(psnr) + "," + cell(mse) + "," + cell(nrmse) + "," + cell(dsc) +
         "," + cell(hd) + "," + cell(circ_rmse);
}

}  // namespace phasegen
