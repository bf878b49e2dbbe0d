#pragma once

// Foot-process morphometry (area, perimeter, circularity) and slit diaphragm
// length density, all in physical units.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/roidetect.hpp"
#include "amap/types.hpp"

namespace amap {

struct MorphometryRecord {
  std::uint32_t instance_id = 0;
  double area_um2 = 0.0;
  double perimeter_um = 0.0;
  double circularity = 0.0;
};

struct MorphometryTable {
  std::vector<MorphometryRecord> records;
  double sd_length_um = 0.0;
  double roi_area_um2 = 0.0;
  /// Absent when the ROI is empty.
  std::optional<double> sd_length_density;
  double pixel_size_um = kDefaultPixelSizeUm;

  bool empty_roi() const noexcept { return !sd_length_density.has_value(); }
};

namespace detail {

inline void check_instance(const InstanceMap& map, std::uint32_t id) {
  if (id < 1 || id > map.count) {
    throw Error(ErrorCode::UnknownInstance,
                "instance " + std::to_string(id) + " not in 1.." + std::to_string(map.count));
  }
}

inline void check_pixel_size(double pixel_size_um) {
  if (!(pixel_size_um > 0.0) || !std::isfinite(pixel_size_um)) {
    throw Error(ErrorCode::InvalidArgument, "pixel size must be positive and finite");
  }
}

// Eight neighbor directions in counter-clockwise order on screen (y down).
inline constexpr std::array<Offset, 8> kRing = {{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};

inline int ring_index(PixelPoint from, PixelPoint to) {
  for (int k = 0; k < 8; ++k) {
    if (from.x + kRing[k].dx == to.x && from.y + kRing[k].dy == to.y) return k;
  }
  return -1;
}

/// Raster-first pixel of every label (index 0 unused).
inline std::vector<std::optional<PixelPoint>> first_pixels(const InstanceMap& map) {
  std::vector<std::optional<PixelPoint>> first(static_cast<std::size_t>(map.count) + 1);
  for (int y = 0; y < map.height(); ++y) {
    auto row = map.labels.row(y);
    for (int x = 0; x < map.width(); ++x) {
      const auto v = row[x];
      if (v != 0 && v <= map.count && !first[v]) first[v] = PixelPoint{x, y};
    }
  }
  return first;
}

}  // namespace detail

/// Outer border of the 8-connected pixel set containing `start`, following
/// Suzuki & Abe border following. `start` must be the raster-first pixel of
/// the set so that its west neighbor is outside. Returns the pixel centers in
/// traversal order; a lone pixel yields just itself.
inline std::vector<PixelPoint> trace_outer_contour(const InstanceMap& map, std::uint32_t id,
                                                   PixelPoint start) {
  auto inside = [&](PixelPoint p) {
    return map.labels.contains(p.x, p.y) && map.labels(p.x, p.y) == id;
  };
  auto step = [](PixelPoint p, int k) {
    return PixelPoint{p.x + detail::kRing[k].dx, p.y + detail::kRing[k].dy};
  };

  std::vector<PixelPoint> contour{start};
  // Clockwise from the west neighbor for the first foreground neighbor.
  std::optional<PixelPoint> first_neighbor;
  for (int i = 0; i < 8; ++i) {
    const int k = (4 - i + 8) % 8;
    if (inside(step(start, k))) {
      first_neighbor = step(start, k);
      break;
    }
  }
  if (!first_neighbor) return contour;

  PixelPoint prev = *first_neighbor;
  PixelPoint cur = start;
  for (;;) {
    const int d = detail::ring_index(cur, prev);
    PixelPoint next = prev;
    for (int i = 1; i <= 8; ++i) {
      const auto cand = step(cur, (d + i) % 8);
      if (inside(cand)) {
        next = cand;
        break;
      }
    }
    if (next == start && cur == *first_neighbor) break;
    contour.push_back(next);
    prev = cur;
    cur = next;
  }
  return contour;
}

/// Closed polyline length over pixel centers, orthogonal steps 1 and
/// diagonal steps sqrt(2), in pixels.
inline double contour_length_px(const std::vector<PixelPoint>& contour) {
  if (contour.size() < 2) return 0.0;
  double len = 0.0;
  for (std::size_t i = 0; i < contour.size(); ++i) {
    const auto& a = contour[i];
    const auto& b = contour[(i + 1) % contour.size()];
    len += (a.x != b.x && a.y != b.y) ? std::numbers::sqrt2 : 1.0;
  }
  return len;
}

inline double perimeter_from_start(const InstanceMap& map, std::uint32_t id, PixelPoint start,
                                   double pixel_size_um) {
  const auto contour = trace_outer_contour(map, id, start);
  // A lone pixel gets its boundary square.
  if (contour.size() == 1) return 4.0 * pixel_size_um;
  return contour_length_px(contour) * pixel_size_um;
}

inline double instance_area(const InstanceMap& map, std::uint32_t id, double pixel_size_um) {
  detail::check_instance(map, id);
  detail::check_pixel_size(pixel_size_um);
  std::size_t n = 0;
  for (auto v : map.labels.values()) n += v == id;
  return static_cast<double>(n) * pixel_size_um * pixel_size_um;
}

inline double instance_perimeter(const InstanceMap& map, std::uint32_t id, double pixel_size_um) {
  detail::check_instance(map, id);
  detail::check_pixel_size(pixel_size_um);
  for (int y = 0; y < map.height(); ++y) {
    auto row = map.labels.row(y);
    for (int x = 0; x < map.width(); ++x) {
      if (row[x] == id) return perimeter_from_start(map, id, {x, y}, pixel_size_um);
    }
  }
  throw Error(ErrorCode::UnknownInstance, "instance " + std::to_string(id) + " has no pixels");
}

/// Isoperimetric ratio 4*pi*A/P^2, unclamped.
inline double circularity(double area_um2, double perimeter_um) {
  if (!(perimeter_um > 0.0)) throw Error(ErrorCode::ZeroPerimeter, "perimeter must be positive");
  return 4.0 * std::numbers::pi * area_um2 / (perimeter_um * perimeter_um);
}

namespace detail {

// Yokoi connectivity number for 8-connected foreground. A pixel is simple
// (removable without changing topology) iff it equals 1.
inline int yokoi8(const std::array<int, 8>& n) {
  int c = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[k];
    const int b = 1 - n[(k + 1) % 8];
    const int d = 1 - n[(k + 2) % 8];
    c += a - a * b * d;
  }
  return c;
}

}  // namespace detail

/// Topology-preserving thinning to a one-pixel-wide 8-connected skeleton.
///
/// Each round peels north, south, east and west border pixels in turn.
/// Candidates for a direction are fixed from the image at the start of that
/// sub-iteration, then deleted one by one in raster order if they are still
/// simple and are not line end points. Rounds repeat until nothing changes.
inline BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask img = mask;
  for (auto& v : img.values()) v = v != 0;
  const int w = img.width();
  const int h = img.height();
  auto at = [&](int x, int y) -> int { return img.contains(x, y) ? img(x, y) : 0; };

  constexpr std::array<Offset, 4> kSides = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
  std::vector<PixelPoint> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto side : kSides) {
      candidates.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (img(x, y) && !at(x + side.dx, y + side.dy)) candidates.push_back({x, y});
        }
      }
      for (auto p : candidates) {
        std::array<int, 8> n{};
        int count = 0;
        for (int k = 0; k < 8; ++k) {
          n[k] = at(p.x + detail::kRing[k].dx, p.y + detail::kRing[k].dy);
          count += n[k];
        }
        if (count <= 1) continue;
        if (detail::yokoi8(n) != 1) continue;
        img(p.x, p.y) = 0;
        changed = true;
      }
    }
  }
  return img;
}

/// Sum over distinct 8-neighbor links of a skeleton: orthogonal 1, diagonal
/// sqrt(2), times the pixel size. Isolated pixels add nothing.
inline double skeleton_length(const BinaryMask& skeleton, double pixel_size_um) {
  detail::check_pixel_size(pixel_size_um);
  const int w = skeleton.width();
  const int h = skeleton.height();
  std::size_t orth = 0;
  std::size_t diag = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!skeleton(x, y)) continue;
      if (x + 1 < w && skeleton(x + 1, y)) ++orth;
      if (y + 1 < h) {
        if (skeleton(x, y + 1)) ++orth;
        if (x + 1 < w && skeleton(x + 1, y + 1)) ++diag;
        if (x > 0 && skeleton(x - 1, y + 1)) ++diag;
      }
    }
  }
  return (static_cast<double>(orth) + std::numbers::sqrt2 * static_cast<double>(diag)) *
         pixel_size_um;
}

/// Per-instance records plus SD length density inside the ROI. A semantic
/// map below full resolution is up-sampled first.
inline MorphometryTable quantify(const InstanceMap& instances, const SemanticMap& semantic,
                                 const RoiMask& roi, double pixel_size_um) {
  detail::check_pixel_size(pixel_size_um);
  const SemanticMap full =
      semantic.scale_factor > 1 ? upsample_nearest(semantic, semantic.scale_factor) : semantic;
  const auto same = [&](int w, int h) { return w == instances.width() && h == instances.height(); };
  if (!same(full.width(), full.height()) || !same(roi.width(), roi.height())) {
    throw Error(ErrorCode::DimensionMismatch, "instance map, semantic map and ROI differ in size");
  }

  MorphometryTable table;
  table.pixel_size_um = pixel_size_um;

  const auto first = detail::first_pixels(instances);
  const auto sizes = instance_sizes(instances);
  table.records.reserve(instances.count);
  const double px_area = pixel_size_um * pixel_size_um;
  for (std::uint32_t id = 1; id <= instances.count; ++id) {
    if (!first[id]) throw Error(ErrorCode::UnknownInstance, "instance " + std::to_string(id) + " is empty");
    MorphometryRecord rec;
    rec.instance_id = id;
    rec.area_um2 = static_cast<double>(sizes[id]) * px_area;
    rec.perimeter_um = perimeter_from_start(instances, id, *first[id], pixel_size_um);
    rec.circularity = circularity(rec.area_um2, rec.perimeter_um);
    table.records.push_back(rec);
  }

  BinaryMask sd = sd_binary_mask(full);
  auto sd_values = sd.values();
  auto roi_values = roi.bits.values();
  for (std::size_t i = 0; i < sd_values.size(); ++i) sd_values[i] &= roi_values[i] != 0;
  table.sd_length_um = skeleton_length(skeletonize(sd), pixel_size_um);
  table.roi_area_um2 = static_cast<double>(roi.area_px) * px_area;
  if (roi.area_px > 0) table.sd_length_density = table.sd_length_um / table.roi_area_um2;
  return table;
}

enum class Aggregation { Mean, Median };

struct FeatureSummary {
  std::size_t instances = 0;
  double area_um2 = 0.0;
  double perimeter_um = 0.0;
  double circularity = 0.0;
};

/// Per-image aggregate of the per-instance features. Zero instances give
/// all-zero values with `instances == 0`.
inline FeatureSummary summarize(const MorphometryTable& table, Aggregation how) {
  FeatureSummary s;
  s.instances = table.records.size();
  if (table.records.empty()) return s;
  auto reduce = [&](auto field) {
    std::vector<double> v;
    v.reserve(table.records.size());
    for (const auto& r : table.records) v.push_back(r.*field);
    if (how == Aggregation::Mean) {
      double sum = 0.0;
      for (double x : v) sum += x;
      return sum / static_cast<double>(v.size());
    }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  s.area_um2 = reduce(&MorphometryRecord::area_um2);
  s.perimeter_um = reduce(&MorphometryRecord::perimeter_um);
  s.circularity = reduce(&MorphometryRecord::circularity);
  return s;
}

}  // namespace amap
