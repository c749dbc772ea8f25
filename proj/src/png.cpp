#include "phasegen/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace phasegen {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void append_chunk(std::vector<uint8_t>& file, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_u32_be(file, static_cast<uint32_t>(payload.size()));
  const size_t start = file.size();
  file.insert(file.end(), type, type + 4);
  file.insert(file.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0, file.data() + start, static_cast<uInt>(4 + payload.size()));
  put_u32_be(file, static_cast<uint32_t>(crc));
}

// Critical chunks only: identical input grids give byte-identical files.
void write_png(const std::string& path, int w, int h, int channels,
               const std::vector<uint8_t>& pixels) {
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h) * (static_cast<size_t>(w) * channels + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    const size_t row = static_cast<size_t>(y) * w * channels;
    raw.insert(raw.end(), pixels.begin() + row, pixels.begin() + row + static_cast<size_t>(w) * channels);
  }

  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(zlen);
  if (compress2(compressed.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png compression failed: " + path);
  compressed.resize(zlen);

  std::vector<uint8_t> file;
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  file.insert(file.end(), sig, sig + 8);
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(w));
  put_u32_be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(channels == 3 ? 2 : 0);  // color type: truecolor or grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", compressed);
  append_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open png for writing: " + path);
  out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!out) throw std::runtime_error("failed writing png: " + path);
}

void check_grid(const RealGrid& g, const std::string& path) {
  if (g.height <= 0 || g.width <= 0)
    throw std::invalid_argument("png export needs a non-empty grid: " + path);
  validate_finite(g, "png export input");
}

}  // namespace

void write_png_magnitude(const std::string& path, const RealGrid& g) {
  check_grid(g, path);
  const auto [mn_it, mx_it] = std::minmax_element(g.data.begin(), g.data.end());
  const double mn = *mn_it, range = *mx_it - *mn_it;
  std::vector<uint8_t> pixels(g.size());
  for (size_t i = 0; i < g.size(); ++i) {
    pixels[i] = range > 0.0
                    ? static_cast<uint8_t>(std::lround((g.data[i] - mn) / range * 255.0))
                    : static_cast<uint8_t>(128);
  }
  write_png(path, g.width, g.height, 1, pixels);
}

void write_png_phase(const std::string& path, const RealGrid& phase) {
  check_grid(phase, path);
  std::vector<uint8_t> pixels(phase.size() * 3);
  for (size_t i = 0; i < phase.size(); ++i) {
    // Hue wraps: phase pi and -pi land on the same point of the wheel.
    double hue = (phase.data[i] + kPi) / (2.0 * kPi);
    hue -= std::floor(hue);
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double q = 1.0 - f;
    double r = 0, gg = 0, b = 0;
    switch (sector) {
      case 0: r = 1; gg = f; b = 0; break;
      case 1: r = q; gg = 1; b = 0; break;
      case 2: r = 0; gg = 1; b = f; break;
      case 3: r = 0; gg = q; b = 1; break;
      case 4: r = f; gg = 0; b = 1; break;
      default: r = 1; gg = 0; b = q; break;
    }
    pixels[3 * i] = static_cast<uint8_t>(std::lround(r * 255.0));
    pixels[3 * i + 1] = static_cast<uint8_t>(std::lround(gg * 255.0));
    pixels[3 * i + 2] = static_cast<uint8_t>(std::lround(b * 255.0));
  }
  write_png(path, phase.width, phase.height, 3, pixels);
}

}  // namespace phasegen
