#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "phasegen/image.hpp"
#include "phasegen/kspace.hpp"
#include "phasegen/rng.hpp"
#include "support.hpp"

using namespace phasegen;

// ---------------------------------------------------------------------------
// Brute-force centered DFT oracle, O(N^2) per axis in double precision.
// Centered means ifftshift (rotate by floor(n/2)) before the transform and
// fftshift (rotate by ceil(n/2)) after it, with 1/sqrt(HW) scaling per
// direction, written from the definition rather than the library code.
// ---------------------------------------------------------------------------

namespace {

using cd = std::complex<double>;

std::vector<cd> dft1(const std::vector<cd>& x, bool inverse) {
  const size_t n = x.size();
  std::vector<cd> out(n);
  const double sign = inverse ? 2.0 : -2.0;
  for (size_t k = 0; k < n; ++k) {
    cd acc{0.0, 0.0};
    for (size_t j = 0; j < n; ++j) {
      const double ang = sign * kPi * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      acc += x[j] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<cd> centered_dft2(const ComplexImage& z, bool inverse) {
  const int h = z.height, w = z.width;
  const int fh = h / 2, fw = w / 2;        // ifftshift amounts
  const int ch = h - h / 2, cw = w - w / 2;  // fftshift amounts

  std::vector<cd> buf(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      buf[static_cast<size_t>(y) * w + x] = cd(z.at((y + fh) % h, (x + fw) % w));

  for (int y = 0; y < h; ++y) {
    std::vector<cd> row(buf.begin() + static_cast<size_t>(y) * w,
                        buf.begin() + static_cast<size_t>(y + 1) * w);
    row = dft1(row, inverse);
    std::copy(row.begin(), row.end(), buf.begin() + static_cast<size_t>(y) * w);
  }
  for (int x = 0; x < w; ++x) {
    std::vector<cd> col(h);
    for (int y = 0; y < h; ++y) col[y] = buf[static_cast<size_t>(y) * w + x];
    col = dft1(col, inverse);
    for (int y = 0; y < h; ++y) buf[static_cast<size_t>(y) * w + x] = col[y];
  }

  std::vector<cd> out(buf.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[static_cast<size_t>(y) * w + x] =
          buf[static_cast<size_t>((y + ch) % h) * w + (x + cw) % w] * scale;
  return out;
}

double diff_vs_oracle(const ComplexImage& got, const std::vector<cd>& want) {
  double worst = 0.0;
  for (size_t i = 0; i < got.data.size(); ++i)
    worst = std::max(worst, std::abs(cd(got.data[i]) - want[i]));
  return worst;
}

double energy(const ComplexImage& z) {
  double e = 0.0;
  for (const auto& s : z.data) e += std::norm(cd(s));
  return e;
}

SamplingMask mask_from_flags(int width, std::initializer_list<int> kept_cols) {
  SamplingMask m;
  m.width = width;
  m.kept.assign(width, 0);
  for (int c : kept_cols) m.kept[c] = 1;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

TEST_CASE("fft2c matches the brute-force centered DFT") {
  Rng rng(11);
  // Power-of-two, mixed, odd, and prime sizes; the latter exercise the
  // Bluestein path.
  const std::pair<int, int> sizes[] = {{1, 1}, {4, 4}, {8, 8}, {5, 7}, {12, 20}, {17, 17}};
  for (const auto& hw : sizes) {
    const int h = hw.first, w = hw.second;
    CAPTURE(h);
    CAPTURE(w);
    const ComplexImage z = testutil::random_image(h, w, rng);
    CHECK(diff_vs_oracle(fft2c(z), centered_dft2(z, false)) < 2e-5);
    CHECK(diff_vs_oracle(ifft2c(z), centered_dft2(z, true)) < 2e-5);
  }
}

TEST_CASE("fft2c centers the spectrum at floor(N/2) for even and odd sizes") {
  for (int n : {8, 9}) {
    CAPTURE(n);
    // A centered delta transforms to a flat spectrum...
    ComplexImage delta(n, n);
    delta.at(n / 2, n / 2) = {1.0f, 0.0f};
    const ComplexImage flat = fft2c(delta);
    for (const auto& s : flat.data) CHECK(std::abs(cd(s) - cd(1.0 / n, 0.0)) < 1e-6);

    // ...and a constant image back to a centered delta.
    ComplexImage ones(n, n);
    for (auto& s : ones.data) s = {1.0f, 0.0f};
    const ComplexImage spectrum = fft2c(ones);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const cd want = (y == n / 2 && x == n / 2) ? cd(n, 0.0) : cd(0.0, 0.0);
        CHECK(std::abs(cd(spectrum.at(y, x)) - want) < 1e-5);
      }
  }
}

TEST_CASE("fft2c roundtrip and Parseval on 64x64") {
  Rng rng(12);
  const ComplexImage z = testutil::random_image(64, 64, rng);
  const ComplexImage k = fft2c(z);
  CHECK(testutil::max_abs_diff(ifft2c(k), z) < 1e-5);

  const double ez = energy(z), ek = energy(k);
  CHECK(std::abs(ez - ek) / ez < 1e-4);
}

TEST_CASE("fft2c is linear") {
  Rng rng(13);
  const ComplexImage x = testutil::random_image(10, 6, rng);
  const ComplexImage y = testutil::random_image(10, 6, rng);
  ComplexImage combo(10, 6);
  for (size_t i = 0; i < combo.data.size(); ++i)
    combo.data[i] = 2.5f * x.data[i] - 0.75f * y.data[i];

  const ComplexImage fx = fft2c(x), fy = fft2c(y), fc = fft2c(combo);
  for (size_t i = 0; i < fc.data.size(); ++i)
    CHECK(std::abs(cd(fc.data[i]) - (2.5 * cd(fx.data[i]) - 0.75 * cd(fy.data[i]))) < 1e-5);
}

// ---------------------------------------------------------------------------
// Sampling masks
// ---------------------------------------------------------------------------

TEST_CASE("center block size uses round-half-away-from-zero") {
  Rng rng(21);
  struct Case {
    int width;
    float cf;
    int expect;
  };
  // 0.25 * 10 = 2.5 exactly: half-away gives 3 where banker's rounding
  // would give 2.
  const Case cases[] = {{320, 0.08f, 26}, {320, 0.04f, 13}, {10, 0.25f, 3}, {10, 0.0f, 0}};
  for (const auto& c : cases) {
    CAPTURE(c.width);
    CAPTURE(c.cf);
    const SamplingMask m = make_cartesian_mask(c.width, 4.0f, c.cf, rng);
    CHECK(m.center_count() == c.expect);

    // The block is contiguous, fully kept, and starts at (W - c)/2.
    const int start = (c.width - c.expect) / 2;
    for (int x = start; x < start + c.expect; ++x) CHECK(m.kept[x] == 1);
  }
}

TEST_CASE("mask keeps at least the center and respects probability extremes") {
  Rng rng(22);
  // accel so high the target is below the center block: nothing else kept.
  const SamplingMask tight = make_cartesian_mask(32, 16.0f, 0.5f, rng);
  CHECK(tight.kept_count() == tight.center_count());

  // accel 1 keeps every column.
  const SamplingMask full = make_cartesian_mask(32, 1.0f, 0.1f, rng);
  CHECK(full.kept_count() == 32);

  CHECK_THROWS_AS(make_cartesian_mask(0, 4.0f, 0.1f, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_cartesian_mask(32, 0.5f, 0.1f, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_cartesian_mask(32, 4.0f, 1.5f, rng), std::invalid_argument);
}

TEST_CASE("mask sampling hits the expected kept-column count on average") {
  Rng rng(23);
  double total = 0.0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) total += make_cartesian_mask(320, 4.0f, 0.08f, rng).kept_count();
  // Expected exactly width/accel = 80; the Bernoulli tail gives sigma of the
  // mean ~0.21, so +-3 is a generous band.
  CHECK(std::abs(total / trials - 80.0) < 3.0);
}

TEST_CASE("mask roundtrips through file with its sidecar") {
  const std::string dir = testutil::scratch_dir("mask");
  Rng rng(24);
  const SamplingMask m = make_cartesian_mask(64, 4.0f, 0.08f, rng);
  write_mask(dir + "/m.cxt1", m, 24);

  const SamplingMask r = read_mask(dir + "/m.cxt1");
  CHECK(r.width == m.width);
  CHECK(r.kept == m.kept);
  CHECK(r.acceleration == doctest::Approx(4.0));
  CHECK(r.center_fraction == doctest::Approx(0.08));

  // The sidecar is plain text carrying the generator parameters.
  const auto meta = testutil::slurp(dir + "/m.cxt1.meta");
  const std::string text(meta.begin(), meta.end());
  CHECK(text.find("accel=4") != std::string::npos);
  CHECK(text.find("seed=24") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Masking, zerofill, data consistency
// ---------------------------------------------------------------------------

TEST_CASE("apply_mask equals multiplication by a column indicator") {
  Rng rng(31);
  const ComplexImage k = testutil::random_image(6, 8, rng);
  SamplingMask m = mask_from_flags(8, {0, 3, 4, 7});

  const ComplexImage got = apply_mask(k, m);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      const cfloat want = m.kept[x] ? k.at(y, x) : cfloat(0.0f, 0.0f);
      CHECK(got.at(y, x).real() == want.real());  // kept columns bit-equal
      CHECK(got.at(y, x).imag() == want.imag());
    }

  SamplingMask wrong = mask_from_flags(9, {0});
  CHECK_THROWS_AS(apply_mask(k, wrong), std::invalid_argument);
}

TEST_CASE("zerofill with a full mask recovers the image") {
  Rng rng(32);
  const ComplexImage img = testutil::random_image(16, 16, rng);
  SamplingMask full;
  full.width = 16;
  full.kept.assign(16, 1);

  const PolarImage rec = zerofill_recon(apply_mask(fft2c(img), full));
  const PolarImage want = to_polar(img);
  CHECK(testutil::max_abs_diff(rec.magnitude, want.magnitude) < 1e-5);
}

TEST_CASE("zerofill of a masked spectrum equals the inverse transform") {
  Rng rng(33);
  const ComplexImage k = testutil::random_image(12, 12, rng);
  const SamplingMask m = mask_from_flags(12, {2, 5, 6, 7, 11});
  const ComplexImage masked = apply_mask(k, m);

  const PolarImage rec = zerofill_recon(masked);
  const PolarImage want = to_polar(ifft2c(masked));
  CHECK(testutil::max_abs_diff(rec.magnitude, want.magnitude) == 0.0);
  CHECK(testutil::max_abs_diff(rec.phase, want.phase) == 0.0);
}

TEST_CASE("data_consistency restores kept columns bit-exactly and is idempotent") {
  Rng rng(34);
  const ComplexImage acquired = testutil::random_image(8, 10, rng);
  const ComplexImage predicted = testutil::random_image(8, 10, rng);
  const SamplingMask m = mask_from_flags(10, {1, 4, 5, 9});

  const ComplexImage out = data_consistency(predicted, acquired, m);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      const cfloat want = m.kept[x] ? acquired.at(y, x) : predicted.at(y, x);
      CHECK(out.at(y, x).real() == want.real());
      CHECK(out.at(y, x).imag() == want.imag());
    }

  CHECK(testutil::bit_equal(data_consistency(out, acquired, m), out));

  ComplexImage small(8, 9);
  CHECK_THROWS_AS(data_consistency(small, acquired, m), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Center crop / pad
// ---------------------------------------------------------------------------

TEST_CASE("crop_center selects the floor(N/2)-centered block") {
  ComplexImage z(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) z.at(y, x) = {static_cast<float>(10 * y + x), 0.0f};

  const ComplexImage c = crop_center(z, 3, 3);
  // Input center (3,3) maps to output center (1,1): rows/cols 2..4.
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      CHECK(c.at(y, x).real() == static_cast<float>(10 * (y + 2) + (x + 2)));

  CHECK_THROWS_AS(crop_center(z, 7, 3), std::invalid_argument);
  CHECK_THROWS_AS(crop_center(z, 0, 3), std::invalid_argument);
}

TEST_CASE("pad_center is inverted by crop_center and vice versa on the kept block") {
  Rng rng(41);
  const ComplexImage small = testutil::random_image(5, 6, rng);
  const ComplexImage padded = pad_center(small, 9, 11);
  CHECK(testutil::bit_equal(crop_center(padded, 5, 6), small));

  // Pad places zeros everywhere outside the block.
  double outside = 0.0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) {
      const bool in_block = y >= (9 / 2 - 5 / 2) && y < (9 / 2 - 5 / 2 + 5) &&
                            x >= (11 / 2 - 6 / 2) && x < (11 / 2 - 6 / 2 + 6);
      if (!in_block) outside += std::abs(cd(padded.at(y, x)));
    }
  CHECK(outside == 0.0);

  CHECK_THROWS_AS(pad_center(small, 4, 11), std::invalid_argument);
}

TEST_CASE("pad_center is the exact adjoint of crop_center") {
  Rng rng(42);
  const ComplexImage x = testutil::random_image(10, 12, rng);
  const ComplexImage y = testutil::random_image(6, 8, rng);

  // <crop(x), y> == <x, pad(y)> with sums accumulated in double.
  const ComplexImage cx = crop_center(x, 6, 8);
  const ComplexImage py = pad_center(y, 10, 12);
  cd lhs{0.0, 0.0}, rhs{0.0, 0.0};
  for (size_t i = 0; i < cx.data.size(); ++i) lhs += std::conj(cd(cx.data[i])) * cd(y.data[i]);
  for (size_t i = 0; i < x.data.size(); ++i) rhs += std::conj(cd(x.data[i])) * cd(py.data[i]);
  CHECK(std::abs(lhs - rhs) < 1e-6);
}

TEST_CASE("crop_center_mask tracks the crop window") {
  SamplingMask m = mask_from_flags(12, {0, 3, 5, 6, 8, 11});
  m.acceleration = 4.0f;
  m.center_fraction = 0.1f;

  const SamplingMask c = crop_center_mask(m, 6);
  CHECK(c.width == 6);
  CHECK(c.acceleration == 4.0f);
  // Columns 3..8 of the original survive.
  const std::vector<uint8_t> want = {1, 0, 1, 1, 0, 1};
  CHECK(c.kept == want);

  CHECK_THROWS_AS(crop_center_mask(m, 13), std::invalid_argument);
}
