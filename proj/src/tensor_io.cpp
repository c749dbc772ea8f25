#include "phasegen/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace phasegen {

namespace {

constexpr uint8_t kMagic[4] = {0x43, 0x58, 0x54, 0x31};  // "CXT1"
constexpr uint16_t kVersion = 1;
constexpr uint8_t kMaxRank = 8;
// Caps total payload (in floats) at 1 Gi entries; anything above that is
// treated as a corrupt header rather than an allocation request.
constexpr uint64_t kMaxValues = uint64_t(1) << 30;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  static_assert(sizeof(float) == 4);
  const uint32_t v = std::bit_cast<uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const uint8_t* p, size_t n) : p_(p), n_(n) {}

  uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(p_[pos_]) | (static_cast<uint16_t>(p_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }
  const uint8_t* cursor() const { return p_ + pos_; }
  size_t remaining() const { return n_ - pos_; }
  void skip(size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(size_t n) {
    if (n_ - pos_ < n) {
      throw TensorIoError(TensorIoErrorKind::truncated,
                          "tensor file truncated: need " + std::to_string(n) + " more bytes, have " +
                              std::to_string(n_ - pos_));
    }
  }
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
};

}  // namespace

uint64_t TensorData::sample_count() const {
  uint64_t n = 1;
  for (uint64_t d : dims) {
    if (d == 0) return 0;
    if (n > kMaxValues / d) {
      throw TensorIoError(TensorIoErrorKind::dim_overflow, "tensor dimensions overflow");
    }
    n *= d;
  }
  return n;
}

void write_tensor_file(const std::string& path, const TensorData& t) {
  if (t.dims.size() > kMaxRank) {
    throw TensorIoError(TensorIoErrorKind::bad_rank,
                        "tensor rank " + std::to_string(t.dims.size()) + " exceeds limit");
  }
  const uint64_t samples = t.sample_count();
  const uint64_t per = t.dtype == TensorDtype::complex64 ? 2 : 1;
  if (t.values.size() != samples * per) {
    throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                        "tensor value count does not match dims: " + std::to_string(t.values.size()) +
                            " vs " + std::to_string(samples * per));
  }

  std::string out;
  out.reserve(16 + t.dims.size() * 8 + t.values.size() * 4);
  for (uint8_t b : kMagic) out.push_back(static_cast<char>(b));
  put_u16(out, kVersion);
  out.push_back(static_cast<char>(t.dtype));
  out.push_back(static_cast<char>(t.dims.size()));
  for (uint64_t d : t.dims) put_u64(out, d);
  for (float f : t.values) put_f32(out, f);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw TensorIoError(TensorIoErrorKind::io_failure, "cannot open for writing: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw TensorIoError(TensorIoErrorKind::io_failure, "write failed: " + path);
  }
}

TensorData read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw TensorIoError(TensorIoErrorKind::io_failure, "cannot open for reading: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());

  uint8_t magic[4];
  for (auto& b : magic) b = r.u8();
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw TensorIoError(TensorIoErrorKind::bad_magic, "bad magic in " + path);
  }
  const uint16_t version = r.u16();
  if (version != kVersion) {
    throw TensorIoError(TensorIoErrorKind::bad_version,
                        "unsupported version " + std::to_string(version) + " in " + path);
  }
  const uint8_t dtype = r.u8();
  if (dtype != static_cast<uint8_t>(TensorDtype::complex64) &&
      dtype != static_cast<uint8_t>(TensorDtype::real32)) {
    throw TensorIoError(TensorIoErrorKind::bad_dtype,
                        "unknown dtype code " + std::to_string(dtype) + " in " + path);
  }
  const uint8_t rank = r.u8();
  if (rank > kMaxRank) {
    throw TensorIoError(TensorIoErrorKind::bad_rank,
                        "rank " + std::to_string(rank) + " exceeds limit in " + path);
  }

  TensorData t;
  t.dtype = static_cast<TensorDtype>(dtype);
  t.dims.resize(rank);
  for (auto& d : t.dims) d = r.u64();
  const uint64_t samples = t.sample_count();  // throws dim_overflow
  const uint64_t per = t.dtype == TensorDtype::complex64 ? 2 : 1;
  const uint64_t floats = samples * per;
  if (r.remaining() < floats * 4) {
    throw TensorIoError(TensorIoErrorKind::truncated,
                        "payload truncated in " + path + ": header declares " +
                            std::to_string(floats) + " floats, " +
                            std::to_string(r.remaining() / 4) + " present");
  }
  t.values.resize(floats);
  for (auto& v : t.values) v = r.f32();
  if (r.remaining() != 0) {
    throw TensorIoError(TensorIoErrorKind::trailing_bytes,
                        std::to_string(r.remaining()) + " trailing bytes in " + path);
  }
  return t;
}

void write_tensor(const std::string& path, const ComplexImage& z) {
  TensorData t;
  t.dtype = TensorDtype::complex64;
  t.dims = {static_cast<uint64_t>(z.height), static_cast<uint64_t>(z.width)};
  t.values.assign(z.raw(), z.raw() + 2 * z.size());
  write_tensor_file(path, t);
}

ComplexImage read_tensor(const std::string& path) {
  const TensorData t = read_tensor_file(path);
  if (t.dtype != TensorDtype::complex64 || t.dims.size() != 2) {
    throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                        "expected rank-2 complex tensor in " + path);
  }
  ComplexImage z(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  std::memcpy(z.raw(), t.values.data(), t.values.size() * sizeof(float));
  return z;
}

void write_real_grid(const std::string& path, const RealGrid& g) {
  TensorData t;
  t.dtype = TensorDtype::real32;
  t.dims = {static_cast<uint64_t>(g.height), static_cast<uint64_t>(g.width)};
  t.values = g.data;
  write_tensor_file(path, t);
}

RealGrid read_real_grid(const std::string& path) {
  const TensorData t = read_tensor_file(path);
  if (t.dtype != TensorDtype::real32 || t.dims.size() != 2) {
    throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                        "expected rank-2 real tensor in " + path);
  }
  RealGrid g(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  g.data = t.values;
  return g;
}

}  // namespace phasegen
