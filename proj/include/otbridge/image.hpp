#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otbridge/error.hpp"

namespace otbridge {

/// Integer pixel coordinate, row-major.
struct Pixel {
  int row = 0;
  int col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Dense row-major H x W field. The tag keeps intensity images, masks and
/// distance fields from being mixed up at call sites.
template <class T, class Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw Error(ErrorKind::ShapeMismatch, "grid data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  template <class U, class OtherTag>
  bool same_shape(const Grid<U, OtherTag>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorKind::InvalidArgument, "negative grid dimension");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct IntensityTag {};
struct MaskTag {};
struct DistanceTag {};

/// Scalar intensity in [0,1]; vessels are dark.
using GrayImage = Grid<double, IntensityTag>;
/// Values are exactly 0 or 1.
using BinaryMask = Grid<std::uint8_t, MaskTag>;
/// Distance in pixel units; signed fields are negative inside the mask.
using DistanceField = Grid<double, DistanceTag>;

/// Boundary pixels in row-major order, no duplicates.
struct BoundarySet {
  std::vector<Pixel> pixels;

  std::size_t size() const noexcept { return pixels.size(); }
  bool empty() const noexcept { return pixels.empty(); }
  friend bool operator==(const BoundarySet&, const BoundarySet&) = default;
};

template <class A, class TA, class B, class TB>
void require_same_shape(const Grid<A, TA>& a, const Grid<B, TB>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

// Mask helpers used throughout the pipeline.
std::size_t count(const BinaryMask& mask);
BinaryMask complement(const BinaryMask& mask);
BinaryMask intersect(const BinaryMask& a, const BinaryMask& b);
BinaryMask unite(const BinaryMask& a, const BinaryMask& b);
BinaryMask symmetric_difference(const BinaryMask& a, const BinaryMask& b);
BinaryMask rasterize(const BoundarySet& set, int width, int height);

/// Elementwise product image*mask.
GrayImage apply_mask(const GrayImage& image, const BinaryMask& mask);

/// Checks the GrayImage invariant (finite, in [0,1]).
bool is_valid_intensity(const GrayImage& image);
void clamp_unit(GrayImage& image);

}  // namespace otbridge
