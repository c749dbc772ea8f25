#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "phasegen/image.hpp"

namespace phasegen {

// CXT1 container: magic "CXT1", u16 LE version (1), u8 dtype code, u8 rank,
// rank x u64 LE dims, then row-major little-endian f32 samples.  Complex
// tensors (code 1) store two floats per sample (real, imaginary); real
// tensors (code 2) store one.  No padding, no compression.
enum class TensorDtype : uint8_t {
  complex64 = 1,
  real32 = 2,
};

enum class TensorIoErrorKind {
  io_failure,
  bad_magic,
  bad_version,
  bad_dtype,
  bad_rank,
  dim_overflow,
  truncated,
  trailing_bytes,
  shape_mismatch,
};

class TensorIoError : public std::runtime_error {
 public:
  TensorIoError(TensorIoErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  TensorIoErrorKind kind() const { return kind_; }

 private:
  TensorIoErrorKind kind_;
};

struct TensorData {
  TensorDtype dtype = TensorDtype::real32;
  std::vector<uint64_t> dims;
  // Samples in file order; complex tensors interleave (real, imag).
  std::vector<float> values;

  uint64_t sample_count() const;
};

void write_tensor_file(const std::string& path, const TensorData& t);
TensorData read_tensor_file(const std::string& path);

// Rank-2 complex tensor <-> image.
void write_tensor(const std::string& path, const ComplexImage& z);
ComplexImage read_tensor(const std::string& path);

// Rank-2 real tensor <-> grid.
void write_real_grid(const std::string& path, const RealGrid& g);
RealGrid read_real_grid(const std::string& path);

}  // namespace phasegen
