#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "otbridge/error.hpp"
#include "otbridge/metrics.hpp"

using namespace otbridge;

namespace {

BinaryMask rect(int w, int h, int r0, int c0, int rows, int cols) {
  BinaryMask m(w, h);
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) m(r, c) = 1;
  return m;
}

}  // namespace

TEST(Dice, HandCases) {
  const BinaryMask a = rect(20, 20, 2, 2, 8, 8);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, rect(20, 20, 12, 12, 5, 5)), 0.0);
  EXPECT_EQ(dice(a, rect(20, 20, 2, 6, 8, 8)), 0.5);
  bool empty = false;
  EXPECT_EQ(dice(BinaryMask(5, 5), BinaryMask(5, 5), &empty), 1.0);
  EXPECT_TRUE(empty);
  EXPECT_THROW(dice(a, BinaryMask(5, 5)), Error);
}

TEST(Miou, HandCases) {
  const BinaryMask a = rect(10, 10, 0, 0, 5, 10);
  EXPECT_EQ(miou(a, a), 1.0);
  EXPECT_EQ(miou(BinaryMask(6, 6), BinaryMask(6, 6, 1)), 0.0);
  // Only the domain counts.
  BinaryMask left = rect(10, 10, 0, 0, 10, 5);
  const BinaryMask b = rect(10, 10, 0, 0, 5, 5);
  EXPECT_EQ(miou(a, b, &left), 1.0);
}

TEST(Metrics, MatchDefinitionalCounts) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask a = oracle::random_mask(17, 13, 0.3 + 0.004 * trial, rng);
    const BinaryMask b = oracle::random_mask(17, 13, 0.5, rng);
    const BinaryMask d = oracle::random_mask(17, 13, 0.7, rng);
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!d[i]) continue;
      tp += a[i] && b[i];
      fp += a[i] && !b[i];
      fn += !a[i] && b[i];
      tn += !a[i] && !b[i];
    }
    EXPECT_NEAR(miou(a, b, &d), 0.5 * (tp / (tp + fp + fn) + tn / (tn + fp + fn)), 1e-9);
    EXPECT_NEAR(dice(a, b), oracle::dice(a, b), 1e-9);

    const GrayImage x = oracle::random_image(9, 7, rng), y = oracle::random_image(9, 7, rng);
    double se = 0;
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 9; ++c) se += (x(r, c) - y(r, c)) * (x(r, c) - y(r, c));
    const PsnrMse p = psnr_mse(x, y);
    EXPECT_NEAR(p.mse, se / 63, 1e-12);
    EXPECT_NEAR(p.psnr, -10 * std::log10(se / 63), 1e-9);
  }
}

TEST(Psnr, ClosedForms) {
  const GrayImage x(8, 8, 0.3);
  const PsnrMse same = psnr_mse(x, x);
  EXPECT_EQ(same.mse, 0.0);
  EXPECT_TRUE(same.infinite);
  EXPECT_TRUE(std::isinf(same.psnr));
  const PsnrMse shifted = psnr_mse(x, GrayImage(8, 8, 0.4));
  EXPECT_NEAR(shifted.mse, 0.01, 1e-15);
  EXPECT_NEAR(shifted.psnr, 20.0, 1e-12);
  EXPECT_FALSE(shifted.infinite);
}

TEST(Ssim, IdentityAndInversion) {
  std::mt19937_64 rng(2);
  GrayImage x(32, 32);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) x(r, c) = ((r / 4 + c / 4) % 2) ? 0.9 : 0.1;
  EXPECT_EQ(ssim(x, x), 1.0);
  GrayImage inv = x;
  for (double& v : inv.values()) v = 1 - v;
  EXPECT_LT(ssim(x, inv), 0.3);
  const GrayImage noise = oracle::random_image(20, 20, rng);
  EXPECT_EQ(ssim(noise, noise), 1.0);
}

TEST(Ssim, ConstantImagesSingleWindow) {
  const double a = 0.4, d = 0.1;
  const double expected = (2 * a * (a + d) + 1e-4) / (a * a + (a + d) * (a + d) + 1e-4);
  EXPECT_NEAR(ssim(GrayImage(11, 11, a), GrayImage(11, 11, a + d)), expected, 1e-15);
}

TEST(Ssim, MatchesDirectWindowAverage) {
  std::mt19937_64 rng(3);
  const GrayImage x = oracle::random_image(14, 12, rng), y = oracle::random_image(14, 12, rng);
  const int w = 5;
  double total = 0;
  int count = 0;
  for (int r0 = 0; r0 + w <= 12; ++r0)
    for (int c0 = 0; c0 + w <= 14; ++c0) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int r = r0; r < r0 + w; ++r)
        for (int c = c0; c < c0 + w; ++c) {
          sx += x(r, c);
          sy += y(r, c);
          sxx += x(r, c) * x(r, c);
          syy += y(r, c) * y(r, c);
          sxy += x(r, c) * y(r, c);
        }
      const double n = w * w, mx = sx / n, my = sy / n;
      const double vx = sxx / n - mx * mx, vy = syy / n - my * my, cxy = sxy / n - mx * my;
      total += (2 * mx * my + 1e-4) * (2 * cxy + 9e-4) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
      ++count;
    }
  EXPECT_NEAR(ssim(x, y, {.window = w}), total / count, 1e-12);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(GrayImage(8, 8), GrayImage(8, 8)), Error);
  EXPECT_THROW(ssim(GrayImage(20, 20), GrayImage(20, 20), {.window = 4}), Error);
  try {
    ssim(GrayImage(8, 20), GrayImage(8, 20));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ImageTooSmall);
  }
}
