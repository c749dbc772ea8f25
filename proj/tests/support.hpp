#pragma once

// Shared helpers for the test binaries: scratch directories, byte-level file
// access, and seeded random fixtures.  Oracle implementations stay in the
// individual suites so each one is self-contained.

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phasegen/image.hpp"
#include "phasegen/rng.hpp"

namespace testutil {

// Fresh directory under the system temp root; unique per (tag, counter) so
// parallel test binaries never collide.
inline std::string scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto base = std::filesystem::temp_directory_path() / "phasegen_tests";
  auto dir = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

inline phasegen::ComplexImage random_image(int h, int w, phasegen::Rng& rng, double scale = 1.0) {
  phasegen::ComplexImage z(h, w);
  for (auto& s : z.data)
    s = {static_cast<float>(rng.uniform(-scale, scale)),
         static_cast<float>(rng.uniform(-scale, scale))};
  return z;
}

inline phasegen::RealGrid random_grid(int h, int w, phasegen::Rng& rng, double lo = 0.0,
                                      double hi = 1.0) {
  phasegen::RealGrid g(h, w);
  for (auto& s : g.data) s = static_cast<float>(rng.uniform(lo, hi));
  return g;
}

inline double max_abs_diff(const phasegen::ComplexImage& a, const phasegen::ComplexImage& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(std::complex<double>(a.data[i]) -
                                                         std::complex<double>(b.data[i]))));
  return worst;
}

inline double max_abs_diff(const phasegen::RealGrid& a, const phasegen::RealGrid& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return worst;
}

inline bool bit_equal(const phasegen::ComplexImage& a, const phasegen::ComplexImage& b) {
  if (a.height != b.height || a.width != b.width) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i].real() != b.data[i].real() || a.data[i].imag() != b.data[i].imag()) return false;
  return true;
}

}  // namespace testutil
