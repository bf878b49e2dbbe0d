#pragma once

// Region-of-interest detection from the slit diaphragm class:
// up-sample, isolate SD, dilate hard with a disc, erode lightly with a cross,
// then drop small connected components.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/instanceseg.hpp"
#include "amap/types.hpp"

namespace amap {

struct Offset {
  int dx = 0;
  int dy = 0;

  friend constexpr auto operator<=>(const Offset&, const Offset&) = default;
};

class StructuringElement {
 public:
  enum class Kind { Disc, Cross };

  /// {(dx, dy) : dx^2 + dy^2 <= r^2}
  static StructuringElement disc(int radius) {
    if (radius < 0) throw Error(ErrorCode::InvalidArgument, "disc radius must be >= 0");
    StructuringElement se(Kind::Disc, radius);
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy <= radius * radius) se.offsets_.push_back({dx, dy});
      }
    }
    return se;
  }

  /// Center plus `arm` pixels in each of the four axis directions.
  static StructuringElement cross(int arm = 1) {
    if (arm < 0) throw Error(ErrorCode::InvalidArgument, "cross arm must be >= 0");
    StructuringElement se(Kind::Cross, arm);
    for (int dy = -arm; dy <= arm; ++dy) {
      for (int dx = -arm; dx <= arm; ++dx) {
        if (dx == 0 || dy == 0) se.offsets_.push_back({dx, dy});
      }
    }
    return se;
  }

  Kind kind() const noexcept { return kind_; }
  int radius() const noexcept { return radius_; }
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }

  /// Offsets grouped per dy into maximal horizontal runs [dx_lo, dx_hi].
  struct Run {
    int dy;
    int dx_lo;
    int dx_hi;
  };
  std::vector<Run> runs() const {
    std::map<int, std::vector<int>> rows;
    for (auto o : offsets_) rows[o.dy].push_back(o.dx);
    std::vector<Run> out;
    for (auto& [dy, dxs] : rows) {
      std::sort(dxs.begin(), dxs.end());
      int lo = dxs.front();
      int prev = lo;
      for (std::size_t i = 1; i < dxs.size(); ++i) {
        if (dxs[i] != prev + 1) {
          out.push_back({dy, lo, prev});
          lo = dxs[i];
        }
        prev = dxs[i];
      }
      out.push_back({dy, lo, prev});
    }
    return out;
  }

 private:
  StructuringElement(Kind kind, int radius) : kind_(kind), radius_(radius) {}

  Kind kind_;
  int radius_;
  std::vector<Offset> offsets_;
};

/// What pixels outside the image count as during erosion.
enum class ErosionBorder {
  Background,  ///< outside is 0, so foreground touching the edge erodes
  Ignore,      ///< outside places no constraint
};

namespace detail {

// Row prefix sums: sums[y*(w+1) + x] = number of set pixels in row y before x.
inline std::vector<std::uint32_t> row_prefix_sums(const BinaryMask& m) {
  const int w = m.width();
  std::vector<std::uint32_t> sums(static_cast<std::size_t>(w + 1) * m.height(), 0);
  for (int y = 0; y < m.height(); ++y) {
    auto row = m.row(y);
    auto* s = &sums[static_cast<std::size_t>(y) * (w + 1)];
    for (int x = 0; x < w; ++x) s[x + 1] = s[x] + (row[x] != 0);
  }
  return sums;
}

inline BinaryMask dilate_once(const BinaryMask& m, const std::vector<StructuringElement::Run>& runs) {
  const int w = m.width();
  const int h = m.height();
  const auto sums = row_prefix_sums(m);
  BinaryMask out(w, h);
  // out[p] = 1 iff m[p - q] = 1 for some offset q; for a run at dy covering
  // [lo, hi] that is row y - dy, columns [x - hi, x - lo].
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (const auto& r : runs) {
      const int sy = y - r.dy;
      if (sy < 0 || sy >= h) continue;
      const auto* s = &sums[static_cast<std::size_t>(sy) * (w + 1)];
      for (int x = 0; x < w; ++x) {
        if (dst[x]) continue;
        const int a = std::max(0, x - r.dx_hi);
        const int b = std::min(w, x - r.dx_lo + 1);
        if (a < b && s[b] > s[a]) dst[x] = 1;
      }
    }
  }
  return out;
}

inline BinaryMask erode_once(const BinaryMask& m, const std::vector<StructuringElement::Run>& runs,
                             ErosionBorder border) {
  const int w = m.width();
  const int h = m.height();
  const auto sums = row_prefix_sums(m);
  BinaryMask out = m;
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (const auto& r : runs) {
      const int sy = y + r.dy;
      const bool row_outside = sy < 0 || sy >= h;
      for (int x = 0; x < w; ++x) {
        if (!dst[x]) continue;
        const int lo = x + r.dx_lo;
        const int hi = x + r.dx_hi;
        if (border == ErosionBorder::Background) {
          if (row_outside || lo < 0 || hi >= w) {
            dst[x] = 0;
            continue;
          }
        } else if (row_outside) {
          continue;
        }
        const int a = std::max(0, lo);
        const int b = std::min(w, hi + 1);
        if (a >= b) continue;
        const auto* s = &sums[static_cast<std::size_t>(sy) * (w + 1)];
        if (s[b] - s[a] != static_cast<std::uint32_t>(b - a)) dst[x] = 0;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Iterated binary dilation; pixels outside the image are background.
inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se, int iterations) {
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 0");
  const auto runs = se.runs();
  BinaryMask out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::dilate_once(out, runs);
  return out;
}

/// Iterated binary erosion: a pixel survives iff every offset lands on
/// foreground. `border` decides what out-of-image offsets count as.
inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& se, int iterations,
                        ErosionBorder border = ErosionBorder::Background) {
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 0");
  const auto runs = se.runs();
  BinaryMask out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::erode_once(out, runs, border);
  return out;
}

/// Nearest-neighbor up-sampling: every cell becomes a factor x factor block.
inline SemanticMap upsample_nearest(const SemanticMap& map, int factor) {
  if (factor < 1) throw Error(ErrorCode::InvalidArgument, "up-sampling factor must be >= 1");
  SemanticMap out{Grid<SemanticClass>(map.width() * factor, map.height() * factor), 1};
  for (int y = 0; y < out.height(); ++y) {
    auto src = map.labels.row(y / factor);
    auto dst = out.labels.row(y);
    for (int x = 0; x < out.width(); ++x) dst[x] = src[x / factor];
  }
  return out;
}

/// 1 where the class is slit diaphragm.
inline BinaryMask sd_binary_mask(const SemanticMap& semantic) {
  BinaryMask out(semantic.width(), semantic.height());
  auto src = semantic.labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == SemanticClass::SlitDiaphragm;
  return out;
}

/// Zeroes every connected component with fewer than `min_area` pixels.
inline BinaryMask filter_components_by_area(const BinaryMask& mask, std::size_t min_area,
                                            Connectivity connectivity = Connectivity::Eight) {
  if (min_area == 0) return mask;
  const auto labeled = label_components(mask, connectivity);
  const auto sizes = instance_sizes(labeled);
  BinaryMask out(mask.width(), mask.height());
  auto src = labeled.labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0 && sizes[src[i]] >= min_area;
  return out;
}

struct RoiParams {
  int dilation_radius = 5;
  int dilation_iterations = 10;
  int erosion_iterations = 2;
  std::size_t min_component_area = 20000;
  /// Connectivity used when measuring component areas.
  Connectivity connectivity = Connectivity::Eight;

  void validate() const {
    if (dilation_radius < 0 || dilation_iterations < 0 || erosion_iterations < 0) {
      throw Error(ErrorCode::InvalidArgument, "ROI radius and iteration counts must be >= 0");
    }
    if (static_cast<long long>(dilation_radius) * dilation_iterations <= erosion_iterations) {
      throw Error(ErrorCode::InvalidArgument,
                  "ROI dilation extent (radius x iterations) must exceed the erosion iterations");
    }
  }
};

/// Intermediate masks of one ROI computation, all at full resolution.
struct RoiStages {
  BinaryMask sd;
  BinaryMask dilated;
  BinaryMask eroded;  ///< the ROI before area filtering
  RoiMask roi;
};

/// Full ROI pipeline. Erosion ignores out-of-image pixels so structures that
/// touch the image edge are not eaten from outside; with that, every SD pixel
/// stays inside the pre-filter mask whenever the dilation extent is at least
/// the erosion extent.
inline RoiStages detect_roi_stages(const SemanticMap& semantic, const RoiParams& params) {
  params.validate();
  RoiStages st;
  st.sd = sd_binary_mask(upsample_nearest(semantic, semantic.scale_factor));
  st.dilated = dilate(st.sd, StructuringElement::disc(params.dilation_radius),
                      params.dilation_iterations);
  st.eroded = erode(st.dilated, StructuringElement::cross(1), params.erosion_iterations,
                    ErosionBorder::Ignore);
  st.roi = make_roi(filter_components_by_area(st.eroded, params.min_component_area,
                                              params.connectivity));
  return st;
}

inline RoiMask detect_roi(const SemanticMap& semantic, const RoiParams& params) {
  return detect_roi_stages(semantic, params).roi;
}

}  // namespace amap
