#include "phasegen/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "phasegen/tensor_io.hpp"

namespace phasegen {

int SamplingMask::kept_count() const {
  int n = 0;
  for (uint8_t k : kept) n += k != 0;
  return n;
}

int SamplingMask::center_count() const {
  return static_cast<int>(std::round(static_cast<double>(center_fraction) * width));
}

SamplingMask make_cartesian_mask(int width, float acceleration, float center_fraction, Rng& rng) {
  if (width <= 0) throw std::invalid_argument("make_cartesian_mask: width must be positive");
  if (acceleration < 1.0f) {
    throw std::invalid_argument("make_cartesian_mask: acceleration must be >= 1");
  }
  if (center_fraction < 0.0f || center_fraction > 1.0f) {
    throw std::invalid_argument("make_cartesian_mask: center_fraction must be in [0, 1]");
  }
  SamplingMask m;
  m.width = width;
  m.acceleration = acceleration;
  m.center_fraction = center_fraction;
  m.kept.assign(width, 0);

  const int center = static_cast<int>(std::round(static_cast<double>(center_fraction) * width));
  if (center > width) throw std::invalid_argument("make_cartesian_mask: center exceeds width");
  const int start = (width - center) / 2;
  for (int x = start; x < start + center; ++x) m.kept[x] = 1;

  const double target = static_cast<double>(width) / acceleration;
  double p = 0.0;
  if (width > center) p = (target - center) / static_cast<double>(width - center);
  p = std::clamp(p, 0.0, 1.0);
  for (int x = 0; x < width; ++x) {
    if (m.kept[x]) continue;
    if (rng.uniform01() < p) m.kept[x] = 1;
  }
  return m;
}

void write_mask(const std::string& path, const SamplingMask& mask, uint64_t seed) {
  TensorData t;
  t.dtype = TensorDtype::real32;
  t.dims = {static_cast<uint64_t>(mask.width)};
  t.values.resize(mask.width);
  for (int x = 0; x < mask.width; ++x) t.values[x] = mask.kept[x] ? 1.0f : 0.0f;
  write_tensor_file(path, t);

  std::ofstream meta(path + ".meta", std::ios::trunc);
  if (!meta) {
    throw TensorIoError(TensorIoErrorKind::io_failure, "cannot write mask sidecar: " + path);
  }
  meta << "accel=" << mask.acceleration << "\n"
       << "center=" << mask.center_fraction << "\n"
       << "seed=" << seed << "\n";
}

SamplingMask read_mask(const std::string& path) {
  const TensorData t = read_tensor_file(path);
  if (t.dtype != TensorDtype::real32 || t.dims.size() != 1) {
    throw TensorIoError(TensorIoErrorKind::shape_mismatch, "expected rank-1 real tensor: " + path);
  }
  SamplingMask m;
  m.width = static_cast<int>(t.dims[0]);
  m.kept.resize(m.width);
  for (int x = 0; x < m.width; ++x) {
    const float v = t.values[x];
    if (v != 0.0f && v != 1.0f) {
      throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                          "mask values must be 0 or 1: " + path);
    }
    m.kept[x] = v != 0.0f ? 1 : 0;
  }

  std::ifstream meta(path + ".meta");
  if (meta) {
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string val = line.substr(eq + 1);
      if (key == "accel") m.acceleration = std::stof(val);
      if (key == "center") m.center_fraction = std::stof(val);
    }
  }
  return m;
}

ComplexImage apply_mask(const ComplexImage& kspace, const SamplingMask& mask) {
  if (kspace.width != mask.width) {
    throw std::invalid_argument("apply_mask: k-space width does not match mask width");
  }
  ComplexImage out(kspace.height, kspace.width);
  for (int y = 0; y < kspace.height; ++y) {
    for (int x = 0; x < kspace.width; ++x) {
      out.at(y, x) = mask.kept[x] ? kspace.at(y, x) : cfloat(0.0f, 0.0f);
    }
  }
  return out;
}

PolarImage zerofill_recon(const ComplexImage& masked_kspace) {
  return to_polar(ifft2c(masked_kspace));
}

ComplexImage data_consistency(const ComplexImage& predicted, const ComplexImage& acquired,
                              const SamplingMask& mask) {
  if (!same_shape(predicted, acquired)) {
    throw std::invalid_argument("data_consistency: shape mismatch");
  }
  if (predicted.width != mask.width) {
    throw std::invalid_argument("data_consistency: mask width mismatch");
  }
  ComplexImage out = predicted;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (mask.kept[x]) out.at(y, x) = acquired.at(y, x);
    }
  }
  return out;
}

ComplexImage crop_center(const ComplexImage& kspace, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0 || out_h > kspace.height || out_w > kspace.width) {
    throw std::invalid_argument("crop_center: bad output size");
  }
  const int y0 = kspace.height / 2 - out_h / 2;
  const int x0 = kspace.width / 2 - out_w / 2;
  ComplexImage out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) out.at(y, x) = kspace.at(y0 + y, x0 + x);
  }
  return out;
}

ComplexImage pad_center(const ComplexImage& kspace, int out_h, int out_w) {
  if (out_h < kspace.height || out_w < kspace.width) {
    throw std::invalid_argument("pad_center: bad output size");
  }
  const int y0 = out_h / 2 - kspace.height / 2;
  const int x0 = out_w / 2 - kspace.width / 2;
  ComplexImage out(out_h, out_w);
  for (int y = 0; y < kspace.height; ++y) {
    for (int x = 0; x < kspace.width; ++x) out.at(y0 + y, x0 + x) = kspace.at(y, x);
  }
  return out;
}

SamplingMask crop_center_mask(const SamplingMask& mask, int out_w) {
  if (out_w <= 0 || out_w > mask.width) {
    throw std::invalid_argument("crop_center_mask: bad output width");
  }
  const int x0 = mask.width / 2 - out_w / 2;
  SamplingMask m;
  m.width = out_w;
  m.acceleration = mask.acceleration;
  m.center_fraction = mask.center_fraction;
  m.kept.assign(mask.kept.begin() + x0, mask.kept.begin() + x0 + out_w);
  return m;
}

}  // namespace phasegen
