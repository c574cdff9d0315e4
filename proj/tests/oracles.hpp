#pragma once

// Slow definitional implementations used as independent test oracles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "otbridge/image.hpp"

namespace oracle {

using otbridge::BinaryMask;
using otbridge::GrayImage;
using otbridge::Pixel;

inline BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution fg(density);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = fg(rng) ? 1 : 0;
  return m;
}

inline GrayImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage g(w, h);
  for (double& v : g.values()) v = u(rng);
  return g;
}

inline std::vector<Pixel> foreground(const BinaryMask& m) {
  std::vector<Pixel> out;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m(r, c)) out.push_back({r, c});
  return out;
}

inline double nearest_distance(Pixel p, const std::vector<Pixel>& sites) {
  double best = std::numeric_limits<double>::infinity();
  for (const Pixel& s : sites) {
    const double dr = p.row - s.row, dc = p.col - s.col;
    best = std::min(best, std::sqrt(dr * dr + dc * dc));
  }
  return best;
}

/// Boundary by direct definition: foreground with a background (or off-frame) 4-neighbour.
inline std::vector<Pixel> boundary(const BinaryMask& m) {
  std::vector<Pixel> out;
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      bool edge = false;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (!m.contains(rr, cc) || !m(rr, cc)) edge = true;
      }
      if (edge) out.push_back({r, c});
    }
  return out;
}

/// Min/max filter over the disk of `radius`, ignoring off-frame pixels.
inline BinaryMask disk_filter(const BinaryMask& m, double radius, bool dilate) {
  BinaryMask out(m.width(), m.height());
  const int rad = static_cast<int>(std::ceil(radius));
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      bool any = false, all = true;
      for (int a = -rad; a <= rad; ++a)
        for (int b = -rad; b <= rad; ++b) {
          if (a * a + b * b > radius * radius) continue;
          if (!m.contains(r + a, c + b)) continue;
          const bool v = m(r + a, c + b);
          any = any || v;
          all = all && v;
        }
      out(r, c) = dilate ? any : all;
    }
  return out;
}

inline double dice(const BinaryMask& a, const BinaryMask& b) {
  double inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    sa += a[i];
    sb += b[i];
  }
  return sa + sb == 0 ? 1.0 : 2.0 * inter / (sa + sb);
}

}  // namespace oracle
