#include "otbridge/image.hpp"

#include <algorithm>
#include <cmath>

namespace otbridge {

std::size_t count(const BinaryMask& mask) {
  return static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), std::uint8_t{1}));
}

BinaryMask complement(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 0 : 1;
  return out;
}

namespace {
template <class Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op, const char* what) {
  require_same_shape(a, b, what);
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i] != 0, b[i] != 0) ? 1 : 0;
  return out;
}
}  // namespace

BinaryMask intersect(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; }, "intersect");
}

BinaryMask unite(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; }, "unite");
}

BinaryMask symmetric_difference(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x != y; }, "symmetric_difference");
}

BinaryMask rasterize(const BoundarySet& set, int width, int height) {
  BinaryMask out(width, height);
  for (const Pixel& p : set.pixels) {
    if (out.contains(p.row, p.col)) out(p.row, p.col) = 1;
  }
  return out;
}

GrayImage apply_mask(const GrayImage& image, const BinaryMask& mask) {
  require_same_shape(image, mask, "apply_mask");
  GrayImage out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = mask[i] ? image[i] : 0.0;
  return out;
}

bool is_valid_intensity(const GrayImage& image) {
  return std::all_of(image.values().begin(), image.values().end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

void clamp_unit(GrayImage& image) {
  for (double& v : image.values()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace otbridge
