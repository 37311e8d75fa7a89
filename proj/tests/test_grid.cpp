#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ewt/fft.hpp"
#include "ewt/grid.hpp"
#include "ewt/parallel.hpp"
#include "ewt/raster.hpp"
#include "helpers.hpp"

using namespace ewt;
using ewt::testing::max_abs_diff;
using ewt::testing::random_image;

TEST(Dft, ConstantImageHasOnlyDc) {
  const Image img(64, 32, 0.3);
  const Spectrum s = dft2(img);
  const FrequencyGrid fg(img);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      if (x == fg.cx() && y == fg.cy()) {
        // Unitary transform: DC = sum / sqrt(N) = c sqrt(N).
        EXPECT_NEAR(s(x, y).real(), 0.3 * std::sqrt(64.0 * 32.0), 1e-12);
        EXPECT_NEAR(s(x, y).imag(), 0.0, 1e-12);
      } else {
        EXPECT_LT(std::abs(s(x, y)), 1e-12);
      }
    }
}

TEST(Dft, RoundTripIsExact) {
  const Image img = random_image(64, 64, 1);
  EXPECT_LT(max_abs_diff(idft2_real(dft2(img)), img), 1e-12);
  const Image odd = random_image(45, 27, 2);
  EXPECT_LT(max_abs_diff(idft2_real(dft2(odd)), odd), 1e-12);
}

TEST(Dft, CosineHasTwoBins) {
  const int w = 64, h = 48, k = 5;
  const Image img = ewt::testing::grating(w, h, k, 0);
  const Spectrum s = dft2(img);
  const FrequencyGrid fg(img);
  // Each exponential carries half the amplitude, times sqrt(N).
  const double expected = 0.5 * std::sqrt(static_cast<double>(w * h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool peak = y == fg.cy() && (x == fg.cx() + k || x == fg.cx() - k);
      if (peak) {
        EXPECT_NEAR(std::abs(s(x, y)), expected, 1e-9);
      } else {
        EXPECT_LT(std::abs(s(x, y)), 1e-9) << x << "," << y;
      }
    }
}

TEST(Dft, RealSpectrumIsHermitian) {
  for (auto [w, h] : {std::pair{32, 32}, std::pair{33, 20}}) {
    const Image img = random_image(w, h, 3);
    const Spectrum s = dft2(img);
    const FrequencyGrid fg(img);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto m = s(fg.mirror_x(x), fg.mirror_y(y));
        EXPECT_NEAR(std::abs(s(x, y) - std::conj(m)), 0.0, 1e-12);
      }
  }
}

TEST(Dft, RejectsNonFinite) {
  Image img(8, 8);
  img(2, 3) = std::nan("");
  EXPECT_THROW(dft2(img), NumericError);
}

TEST(FrequencyGrid, CenterAndMirror) {
  const FrequencyGrid fg(8, 7);
  EXPECT_EQ(fg.cx(), 4);
  EXPECT_EQ(fg.cy(), 3);
  EXPECT_EQ(fg.normalized(4, 3), (Vec2{0, 0}));
  EXPECT_EQ(fg.mirror_x(5), 3);
  EXPECT_EQ(fg.mirror_x(0), 0);  // Nyquist column maps to itself
  EXPECT_EQ(fg.mirror_y(0), 6);  // odd height: no Nyquist row
  EXPECT_TRUE(fg.self_mirrored(4, 3));
  EXPECT_TRUE(fg.on_nyquist(0, 2));
  EXPECT_FALSE(fg.on_nyquist(1, 0));
  EXPECT_DOUBLE_EQ(fg.normalized(0, 3).x, -0.5);
}

TEST(Bilinear, ReproducesNodes) {
  const Image img = random_image(10, 9, 4);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(bilinear_sample(img, {double(x), double(y)}), img(x, y));
}

TEST(Bilinear, MidpointAndOutside) {
  Image img(8, 8);
  img(3, 4) = 0.0;
  img(4, 4) = 1.0;
  EXPECT_DOUBLE_EQ(bilinear_sample(img, {3.5, 4.0}), 0.5);
  EXPECT_EQ(bilinear_sample(Image(8, 8, 1.0), {-3.0, 2.0}), 0.0);
  EXPECT_EQ(bilinear_sample(Image(8, 8, 1.0), {2.0, 40.0}), 0.0);
}

TEST(Warp, ZeroFieldIsBitExactIdentity) {
  const Image img = random_image(16, 12, 5);
  EXPECT_EQ(warp(img, DisplacementField(16, 12)), img);
}

TEST(Warp, UnitShiftRecoversOriginal) {
  const Image img = random_image(16, 16, 6);
  Image shifted(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 1; x < 16; ++x) shifted(x, y) = img(x - 1, y);
  const Image back = warp(shifted, DisplacementField(16, 16, Vec2{1, 0}));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 15; ++x) EXPECT_EQ(back(x, y), img(x, y));
}

TEST(Warp, HalfPixelOnRamp) {
  Image ramp(16, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) ramp(x, y) = 0.1 * x + 0.02 * y;
  const Image out = warp(ramp, DisplacementField(16, 8, Vec2{0.5, 0}));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 15; ++x) EXPECT_NEAR(out(x, y), 0.1 * (x + 0.5) + 0.02 * y, 1e-14);
}

TEST(Warp, DimensionMismatchThrows) {
  EXPECT_THROW(warp(Image(8, 8), DisplacementField(9, 8)), InvalidArgument);
}

TEST(Gaussian, ZeroSigmaIsIdentity) {
  const Image img = random_image(12, 12, 7);
  EXPECT_EQ(gaussian_smooth(img, 0.0), img);
}

TEST(Gaussian, PreservesConstants) {
  const Image c(20, 15, 0.37);
  const Image out = gaussian_smooth(c, 2.5);
  EXPECT_LT(max_abs_diff(out, c), 1e-12);
  const DisplacementField f(20, 15, Vec2{1.5, -2});
  for (const Vec2& v : gaussian_smooth(f, 1.7)) {
    EXPECT_NEAR(v.x, 1.5, 1e-12);
    EXPECT_NEAR(v.y, -2.0, 1e-12);
  }
}

TEST(Gaussian, ImpulseCenterWeight) {
  Image img(21, 21);
  img(10, 10) = 1.0;
  const Image out = gaussian_smooth(img, 1.0);
  // Truncated at radius ceil(3 sigma) = 3 and renormalized.
  double sum = 0.0;
  for (int k = -3; k <= 3; ++k) sum += std::exp(-0.5 * k * k);
  EXPECT_NEAR(out(10, 10), 1.0 / (sum * sum), 1e-14);
  EXPECT_NEAR(out(13, 10), std::exp(-4.5) / (sum * sum), 1e-14);
  EXPECT_EQ(out(14, 10), 0.0);
}

TEST(Gaussian, MaximumPrinciple) {
  const Image img = random_image(30, 20, 8);
  const Image out = gaussian_smooth(img, 1.3);
  const auto [ilo, ihi] = std::minmax_element(img.begin(), img.end());
  const auto [olo, ohi] = std::minmax_element(out.begin(), out.end());
  EXPECT_LE(*ohi, *ihi);
  EXPECT_GE(*olo, *ilo);
}

TEST(Gaussian, NegativeSigmaThrows) {
  EXPECT_THROW(gaussian_smooth(Image(8, 8), -1.0), InvalidArgument);
}

TEST(Resample, FactorOneIsIdentity) {
  const Image img = random_image(16, 16, 9);
  EXPECT_EQ(resample(img, 1, Resample::Down), img);
}

TEST(Resample, DownUpPreservesConstants) {
  const Image c(64, 64, 0.25);
  const Image down = resample(c, 4, Resample::Down);
  EXPECT_EQ(down.width(), 16);
  EXPECT_EQ(down.height(), 16);
  const Image up = resample(down, 4, Resample::Up);
  EXPECT_EQ(up.width(), 64);
  EXPECT_LT(max_abs_diff(up, c), 1e-12);
}

TEST(Resample, Errors) {
  EXPECT_THROW(resample(Image(64, 64), 3, Resample::Down), InvalidArgument);
  EXPECT_THROW(resample(Image(32, 32), 8, Resample::Down), InvalidArgument);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  for (int threads : {1, 3, 8}) {
    set_thread_count(threads);
    std::vector<std::atomic<int>> hits(101);
    parallel_for(101, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, [](int i) {
                   if (i == 7) throw NumericError("boom");
                 }),
                 NumericError);
  }
  set_thread_count(0);
}

TEST(Parallel, ThreadCountDoesNotChangeResults) {
  const Image img = random_image(40, 33, 10);
  set_thread_count(1);
  const Image a = gaussian_smooth(img, 2.0);
  const Spectrum sa = dft2(img);
  set_thread_count(4);
  const Image b = gaussian_smooth(img, 2.0);
  const Spectrum sb = dft2(img);
  set_thread_count(0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa, sb);
}

TEST(Image, RejectsTinyOrNonFinite) {
  EXPECT_THROW(check_image(Image(7, 8), "t"), InvalidArgument);
  Image img(8, 8);
  img[3] = INFINITY;
  EXPECT_THROW(check_image(img, "t"), NumericError);
}
