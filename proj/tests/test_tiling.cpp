#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "amap/tiling.hpp"
#include "test_util.hpp"

using namespace amap;
using testutil::expect_code;

namespace {

std::set<int> xs_of(const PatchPlan& p) {
  std::set<int> s;
  for (auto o : p.origins) s.insert(o.x);
  return s;
}

std::set<int> ys_of(const PatchPlan& p) {
  std::set<int> s;
  for (auto o : p.origins) s.insert(o.y);
  return s;
}

// Per-pixel coverage counts computed by painting every patch rectangle.
std::vector<int> coverage(const PatchPlan& p) {
  std::vector<int> c(static_cast<std::size_t>(p.width) * p.height, 0);
  for (auto o : p.origins) {
    for (int y = o.y; y < o.y + p.patch_size; ++y) {
      for (int x = o.x; x < o.x + p.patch_size; ++x) ++c[static_cast<std::size_t>(y) * p.width + x];
    }
  }
  return c;
}

std::vector<PatchPrediction> crops_of(const SemanticMap& m, const PatchPlan& plan) {
  std::vector<PatchPrediction> out;
  for (auto o : plan.origins) out.push_back({SemanticMap{crop(m.labels, o, plan.patch_size, plan.patch_size), 1}, o});
  return out;
}

PatchPrediction uniform_patch(SemanticClass c, int size, PixelPoint o) {
  return {SemanticMap{Grid<SemanticClass>(size, size, c), 1}, o};
}

}  // namespace

TEST(PlanPatches, ExactFitIsOnePatch) {
  const auto p = plan_patches(384, 384, 384, 256);
  ASSERT_EQ(p.origins.size(), 1u);
  EXPECT_EQ(p.origins[0], (PixelPoint{0, 0}));
}

TEST(PlanPatches, Stride128On640) {
  const auto p = plan_patches(640, 640, 384, 256);
  EXPECT_EQ(xs_of(p), (std::set<int>{0, 128, 256}));
  EXPECT_EQ(ys_of(p), (std::set<int>{0, 128, 256}));
  EXPECT_EQ(p.origins.size(), 9u);
}

TEST(PlanPatches, RaggedEdgeClampsFlush) {
  const auto p = plan_patches(500, 384, 384, 256);
  EXPECT_EQ(xs_of(p), (std::set<int>{0, 116}));
  EXPECT_EQ(ys_of(p), (std::set<int>{0}));
}

TEST(PlanPatches, OriginsAreRasterOrderedAndUnique) {
  const auto p = plan_patches(1000, 700, 384, 256);
  EXPECT_TRUE(std::is_sorted(p.origins.begin(), p.origins.end(),
                             [](PixelPoint a, PixelPoint b) { return a.y != b.y ? a.y < b.y : a.x < b.x; }));
  EXPECT_EQ(std::set<PixelPoint>(p.origins.begin(), p.origins.end()).size(), p.origins.size());
}

TEST(PlanPatches, Errors) {
  expect_code(ErrorCode::ImageSmallerThanPatch, [] { plan_patches(383, 500, 384, 256); });
  expect_code(ErrorCode::ImageSmallerThanPatch, [] { plan_patches(500, 100, 384, 256); });
  expect_code(ErrorCode::InvalidArgument, [] { plan_patches(500, 500, 384, 384); });
  expect_code(ErrorCode::InvalidArgument, [] { plan_patches(500, 500, 384, -1); });
}

TEST(PlanPatches, ZeroOverlapTilesWithoutGaps) {
  const auto p = plan_patches(10, 7, 3, 0);
  EXPECT_EQ(xs_of(p), (std::set<int>{0, 3, 6, 7}));
  EXPECT_EQ(ys_of(p), (std::set<int>{0, 3, 4}));
}

// Flush clamping can add one extra patch per axis beyond ceil(p/s), so the
// tight per-pixel bound is (ceil(p/s) + 1)^2. 700 px wide gives x origins
// 0, 128, 256, 316 and column 383 lies in all four.
TEST(PlanPatches, CoverageBoundWithFlushClamp) {
  const auto p = plan_patches(700, 384, 384, 256);
  EXPECT_EQ(xs_of(p), (std::set<int>{0, 128, 256, 316}));
  EXPECT_EQ(coverage(p)[383], 4);
}

TEST(PlanPatches, CoverageInvariantOnRandomSizes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int ps = std::uniform_int_distribution<int>(1, 48)(rng);
    const int ov = std::uniform_int_distribution<int>(0, ps - 1)(rng);
    const int w = std::uniform_int_distribution<int>(ps, 4 * ps + 7)(rng);
    const int h = std::uniform_int_distribution<int>(ps, 4 * ps + 7)(rng);
    const auto p = plan_patches(w, h, ps, ov);
    const int per_axis = (ps + p.stride() - 1) / p.stride() + 1;
    for (auto o : p.origins) {
      ASSERT_LE(o.x + ps, w);
      ASSERT_LE(o.y + ps, h);
    }
    for (int c : coverage(p)) {
      ASSERT_GE(c, 1);
      ASSERT_LE(c, per_axis * per_axis);
    }
  }
}

TEST(ExtractPatch, IdentityAndIndexing) {
  Image img{Grid<float>(4, 4), 0.5};
  for (int i = 0; i < 16; ++i) img.pixels[i] = static_cast<float>(i);
  EXPECT_EQ(extract_patch(img, {0, 0}, 4), img);
  const auto br = extract_patch(img, {2, 2}, 2);
  EXPECT_EQ(br.pixels(0, 0), 10.0f);
  EXPECT_EQ(br.pixels(1, 0), 11.0f);
  EXPECT_EQ(br.pixels(0, 1), 14.0f);
  EXPECT_EQ(br.pixels(1, 1), 15.0f);
  EXPECT_DOUBLE_EQ(br.pixel_size_um, 0.5);
  expect_code(ErrorCode::OutOfBounds, [&] { extract_patch(img, {3, 3}, 2); });
}

TEST(StitchConsensus, UnanimousCropsReproduceTheMap) {
  std::mt19937_64 rng(3);
  const auto m = testutil::random_semantic(rng, 50, 37);
  const auto plan = plan_patches(50, 37, 16, 9);
  EXPECT_EQ(stitch_consensus(crops_of(m, plan), 50, 37), m);
}

TEST(StitchConsensus, MajorityWins) {
  const std::vector<PatchPrediction> v = {uniform_patch(SemanticClass::FootProcess, 1, {0, 0}),
                                          uniform_patch(SemanticClass::FootProcess, 1, {0, 0}),
                                          uniform_patch(SemanticClass::SlitDiaphragm, 1, {0, 0})};
  EXPECT_EQ(stitch_consensus(v, 1, 1).labels(0, 0), SemanticClass::FootProcess);
}

TEST(StitchConsensus, TiePriority) {
  auto vote = [](std::vector<SemanticClass> cs) {
    std::vector<PatchPrediction> v;
    for (auto c : cs) v.push_back(uniform_patch(c, 1, {0, 0}));
    return stitch_consensus(v, 1, 1).labels(0, 0);
  };
  using C = SemanticClass;
  EXPECT_EQ(vote({C::FootProcess, C::SlitDiaphragm}), C::SlitDiaphragm);
  EXPECT_EQ(vote({C::Background, C::SlitDiaphragm}), C::SlitDiaphragm);
  EXPECT_EQ(vote({C::Background, C::FootProcess}), C::FootProcess);
  EXPECT_EQ(vote({C::Background, C::FootProcess, C::SlitDiaphragm}), C::SlitDiaphragm);
  EXPECT_EQ(vote({C::Background, C::Background, C::FootProcess}), C::Background);
}

TEST(StitchConsensus, OrderIndependent) {
  std::mt19937_64 rng(5);
  const auto plan = plan_patches(40, 40, 16, 10);
  std::vector<PatchPrediction> v;
  for (auto o : plan.origins) v.push_back({testutil::random_semantic(rng, 16, 16), o});
  const auto ref = stitch_consensus(v, 40, 40);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(stitch_consensus(v, 40, 40), ref);
  }
}

TEST(StitchConsensus, Errors) {
  expect_code(ErrorCode::UncoveredPixel,
              [] { stitch_consensus(std::vector{uniform_patch(SemanticClass::Background, 2, {0, 0})}, 3, 2); });
  expect_code(ErrorCode::DimensionMismatch, [] {
    stitch_consensus(std::vector{uniform_patch(SemanticClass::Background, 2, {0, 0}),
                                 uniform_patch(SemanticClass::Background, 3, {0, 0})},
                     3, 3);
  });
  expect_code(ErrorCode::DimensionMismatch,
              [] { stitch_consensus(std::vector{uniform_patch(SemanticClass::Background, 2, {2, 0})}, 3, 2); });
}
