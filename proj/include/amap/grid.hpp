#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include "amap/error.hpp"

namespace amap {

struct PixelPoint {
  int x = 0;
  int y = 0;

  friend constexpr auto operator<=>(const PixelPoint&, const PixelPoint&) = default;
};

/// Dense row-major 2-D grid. Cells are addressed as (x, y) with x the column.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::InvalidArgument, "grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> row(int y) noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Copies the w x h block whose top-left corner is `origin`.
template <typename T>
Grid<T> crop(const Grid<T>& src, PixelPoint origin, int w, int h) {
  if (w < 0 || h < 0 || origin.x < 0 || origin.y < 0 || origin.x + w > src.width() ||
      origin.y + h > src.height()) {
    throw Error(ErrorCode::OutOfBounds, "crop rectangle outside grid");
  }
  Grid<T> out(w, h);
  for (int y = 0; y < h; ++y) {
    auto from = src.row(origin.y + y).subspan(static_cast<std::size_t>(origin.x),
                                              static_cast<std::size_t>(w));
    std::copy(from.begin(), from.end(), out.row(y).begin());
  }
  return out;
}

}  // namespace amap
