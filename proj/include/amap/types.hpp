#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "amap/grid.hpp"

namespace amap {

/// Physical scale the segmentation model was trained at.
inline constexpr double kDefaultPixelSizeUm = 0.0227;

/// Intensity image normalized to [0, 1].
struct Image {
  Grid<float> pixels;
  double pixel_size_um = kDefaultPixelSizeUm;

  int width() const noexcept { return pixels.width(); }
  int height() const noexcept { return pixels.height(); }
  bool operator==(const Image&) const = default;
};

struct ImageStack {
  std::vector<Image> slices;

  std::size_t depth() const noexcept { return slices.size(); }
};

enum class SemanticClass : std::uint8_t {
  Background = 0,
  FootProcess = 1,
  SlitDiaphragm = 2,
};

inline constexpr int kSemanticClassCount = 3;

/// Per-pixel class labels. `scale_factor` is the integer ratio between the
/// full-resolution image and this map.
struct SemanticMap {
  Grid<SemanticClass> labels;
  int scale_factor = 1;

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }
  bool operator==(const SemanticMap&) const = default;
};

/// Values are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

enum class Connectivity { Four = 4, Eight = 8 };

/// Labels are 0 for background and 1..count for instances.
struct InstanceMap {
  Grid<std::uint32_t> labels;
  std::uint32_t count = 0;

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }
  bool operator==(const InstanceMap&) const = default;
};

struct RoiMask {
  BinaryMask bits;
  std::size_t area_px = 0;

  int width() const noexcept { return bits.width(); }
  int height() const noexcept { return bits.height(); }
  bool operator==(const RoiMask&) const = default;
};

inline std::size_t popcount(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v != 0;
  return n;
}

inline RoiMask make_roi(BinaryMask bits) {
  RoiMask roi;
  roi.area_px = popcount(bits);
  roi.bits = std::move(bits);
  return roi;
}

}  // namespace amap
