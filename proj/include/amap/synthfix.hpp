#pragma once

// Synthetic Voronoi semantic maps with known instance counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/types.hpp"

namespace amap {

struct SynthSpec {
  int width = 256;
  int height = 256;
  int n_seeds = 4;
  int sd_thickness = 2;
  std::uint64_t rng_seed = 0;
};

struct SynthTruth {
  std::size_t instance_count = 0;
  std::vector<PixelPoint> seeds;
};

struct SynthResult {
  SemanticMap map;
  SynthTruth truth;
};

namespace detail {

// Uniform integer in [0, n) by rejection, independent of the standard
// library's distribution implementations.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

}  // namespace detail

/// Voronoi cells of random seeds become foot processes; every pixel closer
/// than `sd_thickness` to a cell boundary is slit diaphragm.
///
/// Two foot-process pixels of different cells are then at least
/// 2 * sd_thickness >= 2 apart, so no two cells touch under 8-connectivity.
/// The rare lattice fragments a thin cell corner leaves detached from the
/// cell's main body are folded into the slit diaphragm, so each surviving
/// cell is exactly one 8-connected component. Nearest-seed ties go to the
/// lowest seed index.
inline SynthResult generate_voronoi_semantic(const SynthSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.n_seeds < 1 || spec.sd_thickness < 1) {
    throw Error(ErrorCode::InvalidArgument, "synth spec needs positive size, seeds and thickness");
  }
  const std::uint64_t pixels = static_cast<std::uint64_t>(spec.width) * spec.height;
  if (static_cast<std::uint64_t>(spec.n_seeds) > pixels) {
    throw Error(ErrorCode::SeedPlacementFailure, "more seeds than pixels");
  }

  std::mt19937_64 rng(spec.rng_seed);
  SynthResult out;
  auto& seeds = out.truth.seeds;
  std::set<PixelPoint> taken;
  const int max_attempts = 1000 + 100 * spec.n_seeds;
  for (int attempt = 0; static_cast<int>(seeds.size()) < spec.n_seeds; ++attempt) {
    if (attempt >= max_attempts) {
      throw Error(ErrorCode::SeedPlacementFailure, "could not place distinct seeds");
    }
    PixelPoint p{static_cast<int>(detail::uniform_below(rng, static_cast<std::uint64_t>(spec.width))),
                 static_cast<int>(detail::uniform_below(rng, static_cast<std::uint64_t>(spec.height)))};
    if (taken.insert(p).second) seeds.push_back(p);
  }

  const int n = spec.n_seeds;
  std::vector<double> seed_gap(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = seeds[i].x - seeds[j].x;
      const double dy = seeds[i].y - seeds[j].y;
      seed_gap[static_cast<std::size_t>(i) * n + j] = std::sqrt(dx * dx + dy * dy);
    }
  }

  // owner = nearest seed, -1 for slit diaphragm
  Grid<int> owner(spec.width, spec.height, -1);
  std::vector<long long> d2(static_cast<std::size_t>(n));
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      int best = 0;
      for (int i = 0; i < n; ++i) {
        const long long dx = x - seeds[i].x;
        const long long dy = y - seeds[i].y;
        d2[i] = dx * dx + dy * dy;
        if (d2[i] < d2[best]) best = i;
      }
      // Distance to the bisector with seed j is (d_j^2 - d_best^2) / (2 |s_best - s_j|).
      double boundary = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        if (j == best) continue;
        const double gap = seed_gap[static_cast<std::size_t>(best) * n + j];
        boundary = std::min(boundary, static_cast<double>(d2[j] - d2[best]) / (2.0 * gap));
      }
      if (boundary >= spec.sd_thickness) owner(x, y) = best;
    }
  }

  // Keep only the largest 8-connected piece of each cell.
  Grid<int> piece(spec.width, spec.height, -1);
  std::vector<std::size_t> piece_size;
  std::vector<int> piece_cell;
  std::vector<PixelPoint> stack;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (owner(x, y) < 0 || piece(x, y) >= 0) continue;
      const int id = static_cast<int>(piece_size.size());
      const int cell = owner(x, y);
      piece_size.push_back(0);
      piece_cell.push_back(cell);
      stack.assign(1, {x, y});
      piece(x, y) = id;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        ++piece_size[id];
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = p.x + dx;
            const int qy = p.y + dy;
            if (!owner.contains(qx, qy) || owner(qx, qy) != cell || piece(qx, qy) >= 0) continue;
            piece(qx, qy) = id;
            stack.push_back({qx, qy});
          }
        }
      }
    }
  }
  std::vector<int> main_piece(static_cast<std::size_t>(n), -1);
  for (int id = 0; id < static_cast<int>(piece_size.size()); ++id) {
    int& m = main_piece[piece_cell[id]];
    if (m < 0 || piece_size[id] > piece_size[m]) m = id;
  }

  out.map = SemanticMap{Grid<SemanticClass>(spec.width, spec.height, SemanticClass::SlitDiaphragm), 1};
  for (std::size_t i = 0; i < piece.size(); ++i) {
    const int id = piece[i];
    if (id >= 0 && main_piece[piece_cell[id]] == id) out.map.labels[i] = SemanticClass::FootProcess;
  }
  for (int m : main_piece) out.truth.instance_count += m >= 0;
  return out;
}

}  // namespace amap
