#pragma once

// Instance segmentation from a stitched semantic map: slit diaphragm pixels
// become background and the remaining foot-process mask is split into
// connected components.

#include <cstdint>
#include <numeric>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/types.hpp"

namespace amap {

/// 1 where the class is foot process; slit diaphragm and background are 0.
inline BinaryMask fp_binary_mask(const SemanticMap& semantic) {
  BinaryMask out(semantic.width(), semantic.height());
  auto src = semantic.labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == SemanticClass::FootProcess;
  return out;
}

namespace detail {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  // The smaller root wins so roots stay the earliest provisional label.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return a;
  }

  std::size_t size() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace detail

/// Two-pass connected-component labeling with union-find.
///
/// The first pass assigns provisional labels from the already-visited
/// neighbors (W, N and, for 8-connectivity, NW and NE) and records
/// equivalences. The second pass resolves each pixel to its root and numbers
/// roots in the order they are first met in raster order, so label k is the
/// component whose first raster pixel is the k-th earliest.
inline InstanceMap label_components(const BinaryMask& mask,
                                    Connectivity connectivity = Connectivity::Eight) {
  const int w = mask.width();
  const int h = mask.height();
  InstanceMap out{Grid<std::uint32_t>(w, h), 0};
  auto& labels = out.labels;
  constexpr std::uint32_t kNone = 0;

  detail::DisjointSet sets;
  sets.make();  // slot 0 is background

  const bool eight = connectivity == Connectivity::Eight;
  for (int y = 0; y < h; ++y) {
    auto m = mask.row(y);
    auto cur = labels.row(y);
    const std::uint32_t* up = y > 0 ? labels.row(y - 1).data() : nullptr;
    for (int x = 0; x < w; ++x) {
      if (!m[x]) continue;
      std::uint32_t label = kNone;
      auto merge = [&](std::uint32_t n) {
        if (n == kNone) return;
        label = label == kNone ? n : sets.unite(label, n);
      };
      if (x > 0) merge(cur[x - 1]);
      if (up) {
        merge(up[x]);
        if (eight) {
          if (x > 0) merge(up[x - 1]);
          if (x + 1 < w) merge(up[x + 1]);
        }
      }
      cur[x] = label == kNone ? sets.make() : label;
    }
  }

  std::vector<std::uint32_t> final_label(sets.size(), kNone);
  std::uint32_t next = 0;
  for (auto& v : labels.values()) {
    if (v == kNone) continue;
    const auto root = sets.find(v);
    if (final_label[root] == kNone) final_label[root] = ++next;
    v = final_label[root];
  }
  out.count = next;
  return out;
}

/// Pixel count per label; index 0 counts background.
inline std::vector<std::size_t> instance_sizes(const InstanceMap& map) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(map.count) + 1, 0);
  for (auto v : map.labels.values()) {
    if (v > map.count) throw Error(ErrorCode::UnknownInstance, "label exceeds instance count");
    ++sizes[v];
  }
  return sizes;
}

/// Drops instances smaller than `min_area_px` and renumbers the survivors
/// 1..count' keeping their relative order.
inline InstanceMap filter_small_instances(const InstanceMap& map, std::size_t min_area_px) {
  if (min_area_px == 0) return map;
  const auto sizes = instance_sizes(map);
  std::vector<std::uint32_t> remap(sizes.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    if (sizes[k] >= min_area_px) remap[k] = ++next;
  }
  InstanceMap out{map.labels, next};
  for (auto& v : out.labels.values()) v = remap[v];
  return out;
}

}  // namespace amap
