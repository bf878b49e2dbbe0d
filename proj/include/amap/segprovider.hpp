#pragma once

// Sources of per-patch semantic maps. The pipeline only sees the abstract
// provider, so a neural backend can be registered next to the built-ins.

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "amap/error.hpp"
#include "amap/grid.hpp"
#include "amap/imgio.hpp"
#include "amap/synthfix.hpp"
#include "amap/tiling.hpp"
#include "amap/types.hpp"

namespace amap {

/// An image patch and where it was cut from, in full-resolution pixels.
struct Patch {
  Image image;
  PixelPoint origin;
};

/// Produces a semantic map for one patch. Implementations must be
/// deterministic and safe to call concurrently on distinct patches.
class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;

  virtual std::string name() const = 0;
  virtual int patch_size() const = 0;
  /// Ratio of patch size to output map size.
  virtual int scale_factor() const { return 1; }

  /// Checks the patch size, runs the backend and checks the output size.
  SemanticMap segment_patch(const Patch& patch) const {
    const int ps = patch_size();
    if (patch.image.width() != ps || patch.image.height() != ps) {
      throw Error(ErrorCode::PatchSizeMismatch,
                  name() + " expects " + std::to_string(ps) + "x" + std::to_string(ps) +
                      " patches, got " + std::to_string(patch.image.width()) + "x" +
                      std::to_string(patch.image.height()));
    }
    SemanticMap out = segment(patch);
    const int f = scale_factor();
    if (out.width() * f != ps || out.height() * f != ps) {
      throw Error(ErrorCode::ProviderFailure, name() + " returned a map of the wrong size");
    }
    out.scale_factor = f;
    return out;
  }

 protected:
  virtual SemanticMap segment(const Patch& patch) const = 0;
};

inline SemanticMap segment_patch(const SegmentationProvider& provider, const Patch& patch) {
  return provider.segment_patch(patch);
}

/// Serves crops of a precomputed full-image semantic map. When the stored map
/// is below full resolution by `scale_factor`, crops are taken at the
/// corresponding reduced coordinates.
class MaskLoaderProvider final : public SegmentationProvider {
 public:
  MaskLoaderProvider(SemanticMap global, int patch_size, int scale_factor = 1)
      : global_(std::move(global)), patch_size_(patch_size), scale_factor_(scale_factor) {
    if (patch_size < 1 || scale_factor < 1 || patch_size % scale_factor != 0) {
      throw Error(ErrorCode::InvalidArgument, "patch size must be a positive multiple of the scale factor");
    }
    global_.scale_factor = scale_factor;
  }

  std::string name() const override { return "mask"; }
  int patch_size() const override { return patch_size_; }
  int scale_factor() const override { return scale_factor_; }
  const SemanticMap& global() const noexcept { return global_; }

 protected:
  SemanticMap segment(const Patch& patch) const override {
    const int f = scale_factor_;
    if (patch.origin.x % f != 0 || patch.origin.y % f != 0) {
      throw Error(ErrorCode::ProviderFailure, "patch origin not aligned to the mask scale factor");
    }
    const PixelPoint o{patch.origin.x / f, patch.origin.y / f};
    const int side = patch_size_ / f;
    if (o.x < 0 || o.y < 0 || o.x + side > global_.width() || o.y + side > global_.height()) {
      throw Error(ErrorCode::ProviderFailure, "patch falls outside the stored mask");
    }
    return SemanticMap{crop(global_.labels, o, side, side), f};
  }

 private:
  SemanticMap global_;
  int patch_size_;
  int scale_factor_;
};

inline std::unique_ptr<SegmentationProvider> make_mask_loader(const std::filesystem::path& path,
                                                              int patch_size = kDefaultPatchSize,
                                                              int scale_factor = 1) {
  return std::make_unique<MaskLoaderProvider>(read_semantic_map(path), patch_size, scale_factor);
}

/// Every pixel gets the same class.
class ConstantProvider final : public SegmentationProvider {
 public:
  explicit ConstantProvider(SemanticClass cls = SemanticClass::Background,
                            int patch_size = kDefaultPatchSize)
      : cls_(cls), patch_size_(patch_size) {}

  std::string name() const override { return "synth:constant"; }
  int patch_size() const override { return patch_size_; }

 protected:
  SemanticMap segment(const Patch& patch) const override {
    return SemanticMap{Grid<SemanticClass>(patch.image.width(), patch.image.height(), cls_), 1};
  }

 private:
  SemanticClass cls_;
  int patch_size_;
};

/// Intensity thresholds: below `fp_at` background, below `sd_at` foot
/// process, otherwise slit diaphragm.
class ThresholdProvider final : public SegmentationProvider {
 public:
  ThresholdProvider(float fp_at, float sd_at, int patch_size = kDefaultPatchSize)
      : fp_at_(fp_at), sd_at_(sd_at), patch_size_(patch_size) {
    if (!(fp_at <= sd_at)) throw Error(ErrorCode::InvalidArgument, "threshold order must be fp <= sd");
  }

  std::string name() const override { return "synth:threshold"; }
  int patch_size() const override { return patch_size_; }

 protected:
  SemanticMap segment(const Patch& patch) const override {
    SemanticMap out{Grid<SemanticClass>(patch.image.width(), patch.image.height()), 1};
    auto src = patch.image.pixels.values();
    auto dst = out.labels.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = src[i] < fp_at_   ? SemanticClass::Background
               : src[i] < sd_at_ ? SemanticClass::FootProcess
                                 : SemanticClass::SlitDiaphragm;
    }
    return out;
  }

 private:
  float fp_at_;
  float sd_at_;
  int patch_size_;
};

/// What a factory may need to build a provider for one image.
struct ProviderContext {
  int patch_size = kDefaultPatchSize;
  int scale_factor = 1;
  int image_width = 0;
  int image_height = 0;
  /// Stem of the image being processed; lets directory-backed providers find
  /// the matching file in batch mode.
  std::string image_stem;
};

using ProviderFactory =
    std::function<std::unique_ptr<SegmentationProvider>(std::string_view arg, const ProviderContext&)>;

namespace detail {

inline std::map<std::string, std::string_view> parse_kv_list(std::string_view s) {
  std::map<std::string, std::string_view> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    auto item = s.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "expected key=value in '" + std::string(item) + "'");
    }
    out[std::string(item.substr(0, eq))] = item.substr(eq + 1);
    s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

inline std::filesystem::path resolve_mask_path(const std::filesystem::path& p, const std::string& stem) {
  std::error_code ec;
  if (!std::filesystem::is_directory(p, ec)) return p;
  for (const char* ext : {".tif", ".tiff", ".png"}) {
    auto candidate = p / (stem + ext);
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
  }
  throw Error(ErrorCode::FileNotFound, "no mask for '" + stem + "' in " + p.string());
}

}  // namespace detail

/// Name -> factory table for `--provider kind:arg` specs.
///
/// Built-ins:
///   mask:<file or directory>        precomputed semantic map(s)
///   synth:background                all background
///   synth:constant:<0|1|2>          one class everywhere
///   synth:threshold:<fp>,<sd>       intensity thresholds
///   synth:voronoi:seeds=N,thickness=T,seed=S
///                                   Voronoi fixture at the image size
class ProviderRegistry {
 public:
  static ProviderRegistry& instance() {
    static ProviderRegistry registry;
    return registry;
  }

  void add(const std::string& kind, ProviderFactory factory) {
    std::lock_guard lock(mutex_);
    factories_[kind] = std::move(factory);
  }

  bool contains(const std::string& kind) const {
    std::lock_guard lock(mutex_);
    return factories_.count(kind) != 0;
  }

  std::unique_ptr<SegmentationProvider> create(std::string_view spec, const ProviderContext& ctx) const {
    const auto colon = spec.find(':');
    const std::string kind(spec.substr(0, colon));
    const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
    ProviderFactory factory;
    {
      std::lock_guard lock(mutex_);
      auto it = factories_.find(kind);
      if (it == factories_.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown provider '" + kind + "'");
      }
      factory = it->second;
    }
    return factory(arg, ctx);
  }

 private:
  ProviderRegistry() {
    factories_["mask"] = [](std::string_view arg, const ProviderContext& ctx) {
      if (arg.empty()) throw Error(ErrorCode::InvalidArgument, "mask provider needs a path");
      const auto path = detail::resolve_mask_path(std::filesystem::path(std::string(arg)), ctx.image_stem);
      return make_mask_loader(path, ctx.patch_size, ctx.scale_factor);
    };
    factories_["synth"] = [](std::string_view arg,
                             const ProviderContext& ctx) -> std::unique_ptr<SegmentationProvider> {
      const auto colon = arg.find(':');
      const auto kind = arg.substr(0, colon);
      const auto rest = colon == std::string_view::npos ? std::string_view{} : arg.substr(colon + 1);
      if (kind == "background") {
        return std::make_unique<ConstantProvider>(SemanticClass::Background, ctx.patch_size);
      }
      if (kind == "constant") {
        const int c = detail::parse_number<int>(rest, "class");
        if (c < 0 || c > 2) throw Error(ErrorCode::InvalidArgument, "class must be 0, 1 or 2");
        return std::make_unique<ConstantProvider>(static_cast<SemanticClass>(c), ctx.patch_size);
      }
      if (kind == "threshold") {
        const auto comma = rest.find(',');
        if (comma == std::string_view::npos) {
          throw Error(ErrorCode::InvalidArgument, "threshold provider needs '<fp>,<sd>'");
        }
        return std::make_unique<ThresholdProvider>(detail::parse_number<float>(rest.substr(0, comma), "fp"),
                                                   detail::parse_number<float>(rest.substr(comma + 1), "sd"),
                                                   ctx.patch_size);
      }
      if (kind == "voronoi") {
        SynthSpec spec;
        spec.width = ctx.image_width;
        spec.height = ctx.image_height;
        for (const auto& [key, value] : detail::parse_kv_list(rest)) {
          if (key == "seeds") {
            spec.n_seeds = detail::parse_number<int>(value, key);
          } else if (key == "thickness") {
            spec.sd_thickness = detail::parse_number<int>(value, key);
          } else if (key == "seed") {
            spec.rng_seed = detail::parse_number<std::uint64_t>(value, key);
          } else {
            throw Error(ErrorCode::InvalidArgument, "unknown voronoi option '" + key + "'");
          }
        }
        return std::make_unique<MaskLoaderProvider>(generate_voronoi_semantic(spec).map, ctx.patch_size);
      }
      throw Error(ErrorCode::InvalidArgument, "unknown synthetic provider '" + std::string(kind) + "'");
    };
  }

  mutable std::mutex mutex_;
  std::map<std::string, ProviderFactory> factories_;
};

inline std::unique_ptr<SegmentationProvider> make_provider(std::string_view spec, const ProviderContext& ctx) {
  return ProviderRegistry::instance().create(spec, ctx);
}

}  // namespace amap
