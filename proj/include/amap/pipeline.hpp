#pragma once

// End-to-end composition: tiling -> provider -> consensus stitching ->
// instance labeling, plus ROI and morphometry for a full run.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "amap/bench.hpp"
#include "amap/error.hpp"
#include "amap/instanceseg.hpp"
#include "amap/morphometry.hpp"
#include "amap/roidetect.hpp"
#include "amap/segprovider.hpp"
#include "amap/tiling.hpp"
#include "amap/types.hpp"

namespace amap {

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
/// dynamically; callers write results to slot i so output never depends on
/// scheduling. The first exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

struct SegmentParams {
  int patch_size = kDefaultPatchSize;
  int overlap = kDefaultOverlap;
  Connectivity connectivity = Connectivity::Eight;
  std::size_t min_instance_area = 0;
  int threads = 1;
};

struct SegmentResult {
  PatchPlan plan;
  SemanticMap semantic;   ///< at the provider's output scale
  InstanceMap instances;  ///< at full image resolution
};

/// Runs the provider over every planned patch. Result i belongs to
/// plan.origins[i], with the origin converted to map coordinates.
inline std::vector<PatchPrediction> predict_patches(const Image& image, const SegmentationProvider& provider,
                                                    const PatchPlan& plan, int threads = 1) {
  const int f = provider.scale_factor();
  if (f < 1) throw Error(ErrorCode::ProviderFailure, "provider reported a scale factor below 1");
  if (plan.patch_size % f != 0 || plan.width % f != 0 || plan.height % f != 0) {
    throw Error(ErrorCode::DimensionMismatch,
                "image size and patch size must be multiples of the provider scale factor");
  }
  std::vector<PatchPrediction> out(plan.origins.size());
  parallel_for(plan.origins.size(), threads, [&](std::size_t i) {
    const auto o = plan.origins[i];
    if (o.x % f != 0 || o.y % f != 0) {
      throw Error(ErrorCode::DimensionMismatch, "patch origin not aligned to the provider scale factor");
    }
    Patch patch{extract_patch(image, o, plan.patch_size), o};
    out[i] = PatchPrediction{provider.segment_patch(patch), {o.x / f, o.y / f}};
  });
  return out;
}

inline SemanticMap stitch_predictions(const std::vector<PatchPrediction>& predictions, const PatchPlan& plan,
                                      int scale_factor) {
  return stitch_consensus(predictions, plan.width / scale_factor, plan.height / scale_factor, scale_factor);
}

/// Instances are labeled once, on the complete stitched map at full resolution.
inline InstanceMap label_instances(const SemanticMap& semantic, Connectivity connectivity,
                                   std::size_t min_area) {
  const BinaryMask fp = semantic.scale_factor > 1
                             ? fp_binary_mask(upsample_nearest(semantic, semantic.scale_factor))
                             : fp_binary_mask(semantic);
  return filter_small_instances(label_components(fp, connectivity), min_area);
}

inline SegmentResult segment_image(const Image& image, const SegmentationProvider& provider,
                                   const SegmentParams& params) {
  if (provider.patch_size() != params.patch_size) {
    throw Error(ErrorCode::PatchSizeMismatch, "provider patch size " + std::to_string(provider.patch_size()) +
                                                  " differs from --patch-size " +
                                                  std::to_string(params.patch_size));
  }
  SegmentResult res;
  res.plan = plan_patches(image.width(), image.height(), params.patch_size, params.overlap);
  const auto predictions = predict_patches(image, provider, res.plan, params.threads);
  res.semantic = stitch_predictions(predictions, res.plan, provider.scale_factor());
  res.instances = label_instances(res.semantic, params.connectivity, params.min_instance_area);
  return res;
}

/// Shared state of one pipeline pass, threaded through the bench stages.
struct PipelineRun {
  const Image* image = nullptr;
  const SegmentationProvider* provider = nullptr;
  SegmentParams segment;
  RoiParams roi_params;

  PatchPlan plan;
  std::vector<PatchPrediction> predictions;
  SemanticMap semantic;
  InstanceMap instances;
  RoiMask roi;
  MorphometryTable table;
};

/// The pipeline split into separately timed stages.
inline std::vector<bench::Stage> pipeline_stages(PipelineRun& run) {
  return {
      {"provider",
       [&run] {
         run.plan = plan_patches(run.image->width(), run.image->height(), run.segment.patch_size,
                                 run.segment.overlap);
         run.predictions = predict_patches(*run.image, *run.provider, run.plan, run.segment.threads);
       }},
      {"stitching",
       [&run] { run.semantic = stitch_predictions(run.predictions, run.plan, run.provider->scale_factor()); }},
      {"instance_labeling",
       [&run] {
         run.instances = label_instances(run.semantic, run.segment.connectivity, run.segment.min_instance_area);
       }},
      {"roi", [&run] { run.roi = detect_roi(run.semantic, run.roi_params); }},
      {"morphometry",
       [&run] { run.table = quantify(run.instances, run.semantic, run.roi, run.image->pixel_size_um); }},
  };
}

}  // namespace amap
