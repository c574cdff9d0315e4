#include "otbridge/metrics.hpp"

#include <cmath>
#include <limits>

#include "otbridge/error.hpp"

namespace otbridge {

double dice(const BinaryMask& a, const BinaryMask& b, bool* both_empty) {
  require_same_shape(a, b, "dice");
  std::size_t inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    sa += a[i] != 0;
    sb += b[i] != 0;
  }
  if (both_empty) *both_empty = sa + sb == 0;
  if (sa + sb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

double miou(const BinaryMask& a, const BinaryMask& b, const BinaryMask* domain) {
  require_same_shape(a, b, "miou");
  if (domain) require_same_shape(a, *domain, "miou domain");
  std::size_t inter[2] = {0, 0}, uni[2] = {0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (domain && !(*domain)[i]) continue;
    const bool x = a[i], y = b[i];
    inter[1] += x && y;
    uni[1] += x || y;
    inter[0] += !x && !y;
    uni[0] += !x || !y;
  }
  double sum = 0.0;
  for (int c = 0; c < 2; ++c) sum += uni[c] ? static_cast<double>(inter[c]) / static_cast<double>(uni[c]) : 1.0;
  return 0.5 * sum;
}

double ssim(const GrayImage& x, const GrayImage& y, const SsimOptions& o) {
  require_same_shape(x, y, "ssim");
  if (o.window < 3 || o.window % 2 == 0) throw Error(ErrorKind::InvalidArgument, "SSIM window must be odd and >= 3");
  if (x.width() < o.window || x.height() < o.window)
    throw Error(ErrorKind::ImageTooSmall, "image smaller than the SSIM window");
  const int w = o.window;
  const double n = static_cast<double>(w * w);
  double total = 0.0;
  std::size_t windows = 0;
  for (int r0 = 0; r0 + w <= x.height(); ++r0)
    for (int c0 = 0; c0 + w <= x.width(); ++c0) {
      double mx = 0.0, my = 0.0;
      for (int r = r0; r < r0 + w; ++r)
        for (int c = c0; c < c0 + w; ++c) {
          mx += x(r, c);
          my += y(r, c);
        }
      mx /= n;
      my /= n;
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (int r = r0; r < r0 + w; ++r)
        for (int c = c0; c < c0 + w; ++c) {
          const double dx = x(r, c) - mx, dy = y(r, c) - my;
          vx += dx * dx;
          vy += dy * dy;
          cov += dx * dy;
        }
      vx /= n;
      vy /= n;
      cov /= n;
      total += (2 * mx * my + o.c1) * (2 * cov + o.c2) / ((mx * mx + my * my + o.c1) * (vx + vy + o.c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

PsnrMse psnr_mse(const GrayImage& x, const GrayImage& y) {
  require_same_shape(x, y, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  PsnrMse out;
  out.mse = sum / static_cast<double>(x.size());
  if (out.mse == 0.0) {
    out.psnr = std::numeric_limits<double>::infinity();
    out.infinite = true;
  } else {
    out.psnr = 10.0 * std::log10(1.0 / out.mse);
  }
  return out;
}

}  // namespace otbridge
