#include "otbridge/distance.hpp"

#include <cmath>
#include <limits>

#include "otbridge/geometry.hpp"

namespace otbridge {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - v)^2 + f(v) over the finite sites of f.
// Writes the squared distance and the arg-min site for every q.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg,
                 std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;  // z[0] is -inf, so this stops at k == 0
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) {
      d[q] = kInf;
      arg[q] = -1;
    }
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
    arg[q] = v[j];
  }
}

}  // namespace

FeatureTransform feature_transform(const BinaryMask& mask) {
  if (count(mask) == 0) throw Error(ErrorKind::EmptyMask, "distance transform needs a foreground pixel");
  const int w = mask.width();
  const int h = mask.height();
  const int n = std::max(w, h);

  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> arg(n), v(n);

  // Column pass: squared distance to the nearest foreground row in the same column.
  std::vector<double> col_sq(mask.size());
  std::vector<int> col_row(mask.size());
  f.resize(h);
  d.resize(h);
  arg.resize(h);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = mask(r, c) ? 0.0 : kInf;
    envelope_1d(f, d, arg, v, z);
    for (int r = 0; r < h; ++r) {
      col_sq[mask.index(r, c)] = d[r];
      col_row[mask.index(r, c)] = arg[r];
    }
  }

  FeatureTransform out{DistanceField(w, h), std::vector<Pixel>(mask.size())};
  f.resize(w);
  d.resize(w);
  arg.resize(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = col_sq[mask.index(r, c)];
    envelope_1d(f, d, arg, v, z);
    for (int c = 0; c < w; ++c) {
      const std::size_t i = mask.index(r, c);
      out.distance[i] = std::sqrt(d[c]);
      out.nearest[i] = Pixel{col_row[mask.index(r, arg[c])], arg[c]};
    }
  }
  return out;
}

DistanceField euclidean_distance_transform(const BinaryMask& mask) {
  return feature_transform(mask).distance;
}

DistanceField signed_distance_transform(const BinaryMask& mask) {
  const std::size_t fg = count(mask);
  if (fg == 0 || fg == mask.size()) {
    throw Error(ErrorKind::DegenerateMask, "signed distance needs both foreground and background");
  }
  const BinaryMask boundary = rasterize(extract_boundary(mask), mask.width(), mask.height());
  DistanceField phi = euclidean_distance_transform(boundary);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (mask[i] && !boundary[i]) phi[i] = -phi[i];
  }
  return phi;
}

}  // namespace otbridge
