#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/types.hpp"

namespace amap {

inline constexpr int kDefaultPatchSize = 384;
inline constexpr int kDefaultOverlap = 256;

/// Patch origins over a width x height image, raster order (y outer, x inner).
struct PatchPlan {
  int width = 0;
  int height = 0;
  int patch_size = kDefaultPatchSize;
  int overlap = kDefaultOverlap;
  std::vector<PixelPoint> origins;

  int stride() const noexcept { return patch_size - overlap; }
};

/// Origins along one axis: 0, stride, 2*stride, ... with the last one pulled
/// back flush to the border instead of padding past it.
inline std::vector<int> axis_origins(int extent, int patch_size, int stride) {
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    if (o + patch_size >= extent) {
      out.push_back(extent - patch_size);
      break;
    }
    out.push_back(o);
  }
  return out;
}

inline PatchPlan plan_patches(int width, int height, int patch_size = kDefaultPatchSize,
                              int overlap = kDefaultOverlap) {
  if (patch_size < 1 || overlap < 0 || overlap >= patch_size) {
    throw Error(ErrorCode::InvalidArgument, "need patch_size >= 1 and 0 <= overlap < patch_size");
  }
  if (width < patch_size || height < patch_size) {
    throw Error(ErrorCode::ImageSmallerThanPatch,
                std::to_string(width) + "x" + std::to_string(height) + " image, patch " +
                    std::to_string(patch_size));
  }
  PatchPlan plan{width, height, patch_size, overlap, {}};
  const auto xs = axis_origins(width, patch_size, plan.stride());
  const auto ys = axis_origins(height, patch_size, plan.stride());
  plan.origins.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) plan.origins.push_back({x, y});
  }
  return plan;
}

inline Image extract_patch(const Image& image, PixelPoint origin, int patch_size) {
  return Image{crop(image.pixels, origin, patch_size, patch_size), image.pixel_size_um};
}

/// A provider's answer for the patch whose top-left corner is `origin`, both
/// in the coordinates of the map being stitched.
struct PatchPrediction {
  SemanticMap map;
  PixelPoint origin;
};

/// Per-pixel plurality vote over every patch covering the pixel. Ties go to
/// the class with the higher priority: slit diaphragm, then foot process,
/// then background. Vote counting is commutative, so input order is irrelevant.
inline SemanticMap stitch_consensus(std::span<const PatchPrediction> patches, int width, int height,
                                    int scale_factor = 1) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "empty output extent");
  std::vector<std::array<std::uint32_t, kSemanticClassCount>> votes(
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height), {0, 0, 0});

  for (const auto& p : patches) {
    if (!patches.empty() && !p.map.labels.same_shape(patches.front().map.labels)) {
      throw Error(ErrorCode::DimensionMismatch, "patch maps differ in size");
    }
    const int pw = p.map.width();
    const int ph = p.map.height();
    if (p.origin.x < 0 || p.origin.y < 0 || p.origin.x + pw > width || p.origin.y + ph > height) {
      throw Error(ErrorCode::DimensionMismatch, "patch extends outside the stitched map");
    }
    for (int y = 0; y < ph; ++y) {
      auto src = p.map.labels.row(y);
      auto* dst = &votes[static_cast<std::size_t>(p.origin.y + y) * width + p.origin.x];
      for (int x = 0; x < pw; ++x) ++dst[x][static_cast<std::size_t>(src[x])];
    }
  }

  SemanticMap out{Grid<SemanticClass>(width, height), scale_factor};
  auto labels = out.labels.values();
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const auto& v = votes[i];
    if (v[0] + v[1] + v[2] == 0) {
      throw Error(ErrorCode::UncoveredPixel,
                  "pixel (" + std::to_string(i % width) + ", " + std::to_string(i / width) +
                      ") not covered by any patch");
    }
    auto best = SemanticClass::SlitDiaphragm;
    if (v[1] > v[static_cast<std::size_t>(best)]) best = SemanticClass::FootProcess;
    if (v[0] > v[static_cast<std::size_t>(best)]) best = SemanticClass::Background;
    labels[i] = best;
  }
  return out;
}

}  // namespace amap
