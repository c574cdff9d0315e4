#pragma once

#include "otbridge/image.hpp"

namespace otbridge {

/// 2|A∩B| / (|A|+|B|). Two empty masks score 1; `both_empty` reports that case.
double dice(const BinaryMask& a, const BinaryMask& b, bool* both_empty = nullptr);

/// Mean of foreground and background IoU, counted over `domain` when given.
/// A class absent from both masks scores 1.
double miou(const BinaryMask& a, const BinaryMask& b, const BinaryMask* domain = nullptr);

struct SsimOptions {
  int window = 11;
  double c1 = 1e-4;  // (0.01 * MAX)^2
  double c2 = 9e-4;  // (0.03 * MAX)^2
};

/// Mean SSIM over all window positions fully inside the frame (uniform window).
/// Throws ImageTooSmall when the window does not fit.
double ssim(const GrayImage& x, const GrayImage& y, const SsimOptions& options = {});

struct PsnrMse {
  double psnr = 0.0;  // +inf when mse == 0
  double mse = 0.0;
  bool infinite = false;
};

PsnrMse psnr_mse(const GrayImage& x, const GrayImage& y);

}  // namespace otbridge
