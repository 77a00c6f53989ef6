#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dermscan/error.hpp"

namespace dermscan {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Inclusive pixel rectangle.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Row-major single-channel grid. ChannelPlane and BinaryMask are instances.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(checked(width, height)), fill) {}
  Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked(width, height)))
      throw Error(ErrorKind::InvalidArgument, "grid data size does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool same_shape(const Grid& o) const { return width_ == o.width_ && height_ == o.height_; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return width_ == o.width() && height_ == o.height(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static long checked(int w, int h) {
    if (w < 0 || h < 0) throw Error(ErrorKind::InvalidArgument, "negative grid dimensions");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Real-valued channel samples in [0,255].
using ChannelPlane = Grid<double>;
/// One byte per pixel, nonzero = foreground.
using BinaryMask = Grid<std::uint8_t>;

std::size_t count_foreground(const BinaryMask& mask);

/// Interleaved 8-bit RGB image, at least 8x8.
class RasterImage {
 public:
  static constexpr int kMinSide = 8;

  RasterImage(int width, int height);
  RasterImage(int width, int height, std::vector<std::uint8_t> rgb);

  int width() const { return width_; }
  int height() const { return height_; }

  std::array<std::uint8_t, 3> at(int x, int y) const {
    const std::size_t i = offset(x, y);
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
  }
  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    const std::size_t i = offset(x, y);
    rgb_[i] = c[0];
    rgb_[i + 1] = c[1];
    rgb_[i + 2] = c[2];
  }

  std::span<const std::uint8_t> data() const { return rgb_; }
  std::span<std::uint8_t> data() { return rgb_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t offset(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * width_ + x); }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> rgb_;
};

/// A connected pixel set with its moments. Coordinates are pixel indices;
/// the centroid is the mean pixel index.
struct Region {
  std::vector<Point> pixels;  // raster order
  long area = 0;
  double cx = 0.0;
  double cy = 0.0;
  Box bbox;

  static Region from_pixels(std::vector<Point> pixels);
  bool touches_border(int width, int height) const {
    return bbox.x0 == 0 || bbox.y0 == 0 || bbox.x1 == width - 1 || bbox.y1 == height - 1;
  }
};

/// Ordered closed boundary produced by trace_boundary.
struct Boundary {
  std::vector<Point> points;
  bool degenerate = false;
};

BinaryMask region_mask(const Region& region, int width, int height);

}  // namespace dermscan
