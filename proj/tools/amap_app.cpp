// amap-app: command-line front end for the post-processing pipeline.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amap/amap.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kParseFailure = 1;
constexpr int kUnexpectedFailure = 2;

// Flags shared by the image-oriented subcommands. Not every subcommand
// registers every group.
struct CommonFlags {
  double pixel_size_um = amap::kDefaultPixelSizeUm;
  int patch_size = amap::kDefaultPatchSize;
  int overlap = amap::kDefaultOverlap;
  int connectivity = 8;
  std::size_t min_instance_area = 0;
  int threads = 0;
  int scale_factor = 1;
  std::size_t channel = 0;
  std::string z = "max";
  amap::RoiParams roi;
  std::string config;

  amap::Connectivity conn() const {
    return connectivity == 4 ? amap::Connectivity::Four : amap::Connectivity::Eight;
  }

  int worker_count() const {
    if (threads > 0) return threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  amap::ZSelection z_selection() const {
    if (z == "max") return amap::ZSelection::max_project();
    return amap::ZSelection::single(amap::detail::parse_number<std::size_t>(z, "--z"));
  }

  amap::SegmentParams segment_params() const {
    amap::SegmentParams p;
    p.patch_size = patch_size;
    p.overlap = overlap;
    p.connectivity = conn();
    p.min_instance_area = min_instance_area;
    p.threads = worker_count();
    return p;
  }
};

void add_config_flag(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "key=value file supplying defaults for any flag");
}

void add_scale_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--pixel-size-um", f.pixel_size_um, "Micrometers per pixel")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_segment_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--patch-size", f.patch_size, "Patch side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--overlap", f.overlap, "Patch overlap in pixels")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--connectivity", f.connectivity, "Instance connectivity")
      ->capture_default_str()
      ->check(CLI::IsMember({4, 8}));
  sub->add_option("--min-instance-area", f.min_instance_area, "Drop instances with fewer pixels")
      ->capture_default_str();
  sub->add_option("--threads", f.threads, "Worker threads for patch inference (0 = all cores)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--scale-factor", f.scale_factor, "Full resolution over provider output resolution")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--channel", f.channel, "Nephrin channel index")->capture_default_str();
  sub->add_option("--z", f.z, "Z handling: 'max' or a slice index")->capture_default_str();
}

void add_roi_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--roi-dilate-radius", f.roi.dilation_radius, "Disc radius for ROI dilation")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--roi-dilate-iters", f.roi.dilation_iterations, "ROI dilation iterations")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--roi-erode-iters", f.roi.erosion_iterations, "ROI erosion iterations (cross kernel)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--roi-min-area", f.roi.min_component_area, "Minimum ROI component area in pixels")
      ->capture_default_str();
}

ojson segment_params_json(const CommonFlags& f) {
  return {{"pixel_size_um", f.pixel_size_um},     {"patch_size", f.patch_size},
          {"overlap", f.overlap},                 {"connectivity", f.connectivity},
          {"min_instance_area", f.min_instance_area}, {"scale_factor", f.scale_factor},
          {"channel", f.channel},                 {"z", f.z}};
}

// Removes the suffixes this tool appends so derived artifacts keep the image stem.
std::string artifact_stem(const fs::path& p) {
  std::string stem = p.stem().string();
  for (const char* suffix : {"_semantic", "_instances", "_roi"}) {
    const std::string s(suffix);
    if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0) {
      return stem.substr(0, stem.size() - s.size());
    }
  }
  return stem;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw amap::Error(amap::ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const ojson& j, const fs::path& path) { amap::write_text_file(path, j.dump(2) + "\n"); }

void finish_manifest(amap::RunManifest& m, const fs::path& path) {
  m.finished_at = amap::utc_timestamp();
  write_json(m.to_json(), path);
}

std::vector<fs::path> list_tiffs(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw amap::Error(amap::ErrorCode::FileNotFound, dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".tif" || ext == ".tiff") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw amap::Error(amap::ErrorCode::FileNotFound, "no TIFF files in " + dir.string());
  return out;
}

// The image to segment plus the provider built for it. Without an input image
// a mask provider defines the extent and the pipeline runs on a blank image.
struct Prepared {
  amap::Image image;
  std::unique_ptr<amap::SegmentationProvider> provider;
  std::string stem;
};

Prepared prepare(const std::optional<fs::path>& input, const std::string& provider_spec, const CommonFlags& f,
                 amap::RunManifest& manifest) {
  Prepared p;
  amap::ProviderContext ctx;
  ctx.patch_size = f.patch_size;
  ctx.scale_factor = f.scale_factor;
  if (input) {
    p.image = amap::load_tiff(*input, f.channel, f.z_selection(), f.pixel_size_um);
    p.stem = input->stem().string();
    manifest.add_input("image", *input);
    ctx.image_width = p.image.width();
    ctx.image_height = p.image.height();
    ctx.image_stem = p.stem;
    p.provider = amap::make_provider(provider_spec, ctx);
  } else {
    p.provider = amap::make_provider(provider_spec, ctx);
    const auto* loader = dynamic_cast<const amap::MaskLoaderProvider*>(p.provider.get());
    if (!loader) {
      throw amap::Error(amap::ErrorCode::InvalidArgument, "--input is required unless the provider is mask:<file>");
    }
    const int s = loader->scale_factor();
    p.image = amap::Image{amap::Grid<float>(loader->global().width() * s, loader->global().height() * s),
                          f.pixel_size_um};
    p.stem = artifact_stem(fs::path(provider_spec.substr(provider_spec.find(':') + 1)));
  }
  const auto colon = provider_spec.find(':');
  if (provider_spec.compare(0, colon, "mask") == 0) {
    manifest.add_input("mask", amap::detail::resolve_mask_path(provider_spec.substr(colon + 1), p.stem));
  }
  manifest.provider = provider_spec;
  return p;
}

struct ImageOutputs {
  amap::SegmentResult seg;
  std::optional<amap::RoiMask> roi;
  std::optional<amap::MorphometryTable> table;
};

// segment [+ roi + quantify] for one image, writing artifacts into `out`.
ImageOutputs run_image(const std::optional<fs::path>& input, const std::string& provider_spec, const CommonFlags& f,
                       const fs::path& out, const std::string& command, bool full) {
  amap::RunManifest manifest;
  manifest.command = command;
  manifest.started_at = amap::utc_timestamp();
  auto prep = prepare(input, provider_spec, f, manifest);
  manifest.parameters = segment_params_json(f);
  ImageOutputs res;
  res.seg = amap::segment_image(prep.image, *prep.provider, f.segment_params());

  const std::string semantic_name = prep.stem + "_semantic.tif";
  const std::string instances_name = prep.stem + "_instances.tif";
  amap::write_semantic_map(res.seg.semantic, out / semantic_name);
  amap::write_instance_map(res.seg.instances, out / instances_name);
  manifest.outputs = {semantic_name, instances_name};

  if (full) {
    manifest.parameters["roi"] = amap::to_json(f.roi);
    res.roi = amap::detect_roi(res.seg.semantic, f.roi);
    res.table = amap::quantify(res.seg.instances, res.seg.semantic, *res.roi, f.pixel_size_um);
    const std::string roi_name = prep.stem + "_roi.tif";
    const std::string csv_name = prep.stem + "_morphometry.csv";
    const std::string json_name = prep.stem + "_morphometry.json";
    amap::write_roi_mask(*res.roi, out / roi_name);
    amap::write_text_file(out / csv_name, amap::morphometry_csv(*res.table));
    write_json(amap::morphometry_json(*res.table, f.roi), out / json_name);
    manifest.outputs.push_back(roi_name);
    manifest.outputs.push_back(csv_name);
    manifest.outputs.push_back(json_name);
    if (res.table->empty_roi()) {
      std::cerr << "warning: " << prep.stem << ": empty ROI, SD length density is absent\n";
    }
  }
  finish_manifest(manifest, out / (prep.stem + "." + command + ".manifest.json"));
  return res;
}

// ---- subcommands ----------------------------------------------------------

struct SegmentArgs {
  std::optional<fs::path> input;
  std::optional<fs::path> batch;
  std::string provider;
  fs::path out = ".";
};

int cmd_segment(const SegmentArgs& a, const CommonFlags& f) {
  ensure_dir(a.out);
  if (a.batch) {
    for (const auto& img : list_tiffs(*a.batch)) run_image(img, a.provider, f, a.out, "segment", false);
  } else {
    const auto r = run_image(a.input, a.provider, f, a.out, "segment", false);
    std::cout << "instances: " << r.seg.instances.count << "\n";
  }
  return 0;
}

struct RoiArgs {
  fs::path semantic;
  fs::path out = ".";
};

int cmd_roi(const RoiArgs& a, const CommonFlags& f) {
  ensure_dir(a.out);
  amap::RunManifest manifest;
  manifest.command = "roi";
  manifest.started_at = amap::utc_timestamp();
  auto semantic = amap::read_semantic_map(a.semantic);
  semantic.scale_factor = f.scale_factor;
  manifest.add_input("semantic", a.semantic);
  manifest.parameters = {{"scale_factor", f.scale_factor}, {"roi", amap::to_json(f.roi)}};
  const auto roi = amap::detect_roi(semantic, f.roi);
  const std::string name = artifact_stem(a.semantic) + "_roi.tif";
  amap::write_roi_mask(roi, a.out / name);
  manifest.outputs = {name};
  finish_manifest(manifest, a.out / (artifact_stem(a.semantic) + ".roi.manifest.json"));
  std::cout << "roi_area_px: " << roi.area_px << "\n";
  if (roi.area_px == 0) std::cerr << "warning: empty ROI\n";
  return 0;
}

struct QuantifyArgs {
  std::optional<fs::path> instances;
  std::optional<fs::path> semantic;
  std::optional<fs::path> roi;
  std::optional<fs::path> input;
  std::optional<fs::path> batch;
  std::string provider;
  std::string aggregate = "mean";
  fs::path out = ".";
};

std::string summary_row(const std::string& key, const amap::MorphometryTable& t, amap::Aggregation how) {
  const auto s = amap::summarize(t, how);
  std::string row = key + ',' + amap::format_double(s.area_um2) + ',' + amap::format_double(s.perimeter_um) + ',' +
                    amap::format_double(s.circularity) + ',';
  if (t.sd_length_density) row += amap::format_double(*t.sd_length_density);
  return row + '\n';
}

int cmd_quantify(const QuantifyArgs& a, const CommonFlags& f) {
  ensure_dir(a.out);
  const auto how = a.aggregate == "median" ? amap::Aggregation::Median : amap::Aggregation::Mean;
  const std::string header = "image,fp_area_um2,fp_perimeter_um,fp_circularity,sd_length_density_per_um\n";

  if (a.batch || a.input) {
    if (a.provider.empty()) throw amap::Error(amap::ErrorCode::InvalidArgument, "--provider is required");
    std::vector<fs::path> images = a.batch ? list_tiffs(*a.batch) : std::vector<fs::path>{*a.input};
    std::string summary = header;
    for (const auto& img : images) {
      const auto r = run_image(img, a.provider, f, a.out, "quantify", true);
      summary += summary_row(img.stem().string(), *r.table, how);
    }
    if (a.batch) amap::write_text_file(a.out / "summary.csv", summary);
    return 0;
  }

  if (!a.instances || !a.semantic) {
    throw amap::Error(amap::ErrorCode::InvalidArgument,
                      "quantify needs --instances and --semantic, or --input/--batch with --provider");
  }
  amap::RunManifest manifest;
  manifest.command = "quantify";
  manifest.started_at = amap::utc_timestamp();
  const auto instances = amap::read_instance_map(*a.instances);
  auto semantic = amap::read_semantic_map(*a.semantic);
  semantic.scale_factor = f.scale_factor;
  manifest.add_input("instances", *a.instances);
  manifest.add_input("semantic", *a.semantic);
  manifest.parameters = {{"pixel_size_um", f.pixel_size_um},
                         {"scale_factor", f.scale_factor},
                         {"aggregate", a.aggregate}};
  amap::RoiMask roi;
  if (a.roi) {
    roi = amap::read_roi_mask(*a.roi);
    manifest.add_input("roi", *a.roi);
  } else {
    roi = amap::detect_roi(semantic, f.roi);
    manifest.parameters["roi"] = amap::to_json(f.roi);
  }
  const auto table = amap::quantify(instances, semantic, roi, f.pixel_size_um);
  const std::string stem = artifact_stem(*a.instances);
  const std::string csv_name = stem + "_morphometry.csv";
  const std::string json_name = stem + "_morphometry.json";
  amap::write_text_file(a.out / csv_name, amap::morphometry_csv(table));
  write_json(amap::morphometry_json(table, f.roi), a.out / json_name);
  manifest.outputs = {csv_name, json_name};
  finish_manifest(manifest, a.out / (stem + ".quantify.manifest.json"));
  std::cout << "instances: " << table.records.size() << "\n";
  if (table.empty_roi()) std::cerr << "warning: empty ROI, SD length density is absent\n";
  return 0;
}

struct CompareArgs {
  fs::path a;
  fs::path b;
  double margin = 0.10;
  std::string basis;
  fs::path out = ".";
};

int cmd_compare(const CompareArgs& c) {
  ensure_dir(c.out);
  amap::RunManifest manifest;
  manifest.command = "compare";
  manifest.started_at = amap::utc_timestamp();
  manifest.add_input("a", c.a);
  manifest.add_input("b", c.b);
  manifest.parameters = {{"margin", c.margin}, {"margin_basis", c.basis}, {"alpha", amap::stats::kAlpha}};
  amap::CompareParams params;
  params.margin_fraction = c.margin;
  params.basis = c.basis == "a" ? amap::MarginBasis::A : amap::MarginBasis::B;
  const auto report = amap::compare_tables(amap::read_feature_csv(c.a), amap::read_feature_csv(c.b), params);
  write_json(amap::to_json(report), c.out / "stats.json");
  amap::write_text_file(c.out / "bland_altman.csv", amap::bland_altman_csv(report));
  manifest.outputs = {"stats.json", "bland_altman.csv"};
  finish_manifest(manifest, c.out / "compare.manifest.json");
  for (const auto& fc : report.features) {
    std::printf("%-28s r=%.4f  %s  p_tost=%.3g  %s\n", fc.feature.c_str(), fc.pearson.r,
                amap::stats::format_bland_altman(fc.bland_altman).c_str(), fc.tost.p_tost,
                fc.tost.equivalent ? "equivalent" : "not equivalent");
  }
  return 0;
}

struct BenchArgs {
  std::optional<fs::path> input;
  std::string provider;
  int iterations = 5;
  int warmup = 1;
  int synth_size = 1024;
  std::optional<double> baseline_mean;
  bool svg = false;
  fs::path out = ".";
};

int cmd_bench(const BenchArgs& b, const CommonFlags& f) {
  ensure_dir(b.out);
  amap::RunManifest manifest;
  manifest.command = "bench";
  manifest.started_at = amap::utc_timestamp();
  Prepared prep;
  if (b.input || !b.provider.empty()) {
    if (b.provider.empty()) throw amap::Error(amap::ErrorCode::InvalidArgument, "--provider is required");
    prep = prepare(b.input, b.provider, f, manifest);
  } else {
    // Default workload: a Voronoi fixture served through the mask loader.
    amap::SynthSpec spec;
    spec.width = spec.height = b.synth_size;
    spec.n_seeds = std::max(1, b.synth_size * b.synth_size / 4096);
    const auto synth = amap::generate_voronoi_semantic(spec);
    prep.image = amap::Image{amap::Grid<float>(spec.width, spec.height), f.pixel_size_um};
    prep.provider = std::make_unique<amap::MaskLoaderProvider>(synth.map, f.patch_size);
    manifest.provider = "synth:voronoi:seeds=" + std::to_string(spec.n_seeds) + ",thickness=" +
                        std::to_string(spec.sd_thickness) + ",seed=0 (" + std::to_string(b.synth_size) + "px)";
  }
  manifest.parameters = segment_params_json(f);
  manifest.parameters["roi"] = amap::to_json(f.roi);
  manifest.parameters["iterations"] = b.iterations;
  manifest.parameters["warmup"] = b.warmup;

  amap::PipelineRun run;
  run.image = &prep.image;
  run.provider = prep.provider.get();
  run.segment = f.segment_params();
  run.roi_params = f.roi;
  auto report = amap::bench::run_benchmark(amap::pipeline_stages(run), b.iterations, b.warmup);
  if (b.baseline_mean && report.valid) {
    report.speedup_vs_baseline =
        amap::bench::speedup(*b.baseline_mean, report.end_to_end.summary().mean);
  }
  std::ostringstream csv;
  amap::bench::write_csv(report, csv);
  amap::write_text_file(b.out / "bench.csv", csv.str());
  amap::write_text_file(b.out / "bench.json", amap::bench::to_json(report).dump(2) + "\n");
  manifest.outputs = {"bench.csv", "bench.json"};
  if (b.svg) {
    amap::write_text_file(b.out / "bench.svg", amap::bench::to_svg(report));
    manifest.outputs.push_back("bench.svg");
  }
  finish_manifest(manifest, b.out / "bench.manifest.json");

  for (const auto& st : report.stages) {
    if (!st.seconds.empty()) std::printf("%-18s %.6f s\n", st.name.c_str(), st.summary().mean);
  }
  if (!report.end_to_end.seconds.empty()) {
    std::printf("%-18s %.6f s\n", "end_to_end", report.end_to_end.summary().mean);
  }
  if (report.speedup_vs_baseline) std::printf("speedup vs baseline: %.2fx\n", *report.speedup_vs_baseline);
  if (!report.valid) {
    std::cerr << "benchmark aborted: " << report.error << "\n";
    return kUnexpectedFailure;
  }
  return 0;
}

struct SynthArgs {
  amap::SynthSpec spec;
  fs::path out;
  std::optional<fs::path> truth;
};

int cmd_synth(const SynthArgs& s) {
  const auto res = amap::generate_voronoi_semantic(s.spec);
  if (s.out.has_parent_path()) ensure_dir(s.out.parent_path());
  amap::write_semantic_map(res.map, s.out);
  const fs::path truth_path = s.truth ? *s.truth : fs::path(s.out).replace_extension(".truth.json");
  ojson seeds = ojson::array();
  for (const auto& p : res.truth.seeds) seeds.push_back({p.x, p.y});
  write_json({{"width", s.spec.width},
              {"height", s.spec.height},
              {"n_seeds", s.spec.n_seeds},
              {"sd_thickness", s.spec.sd_thickness},
              {"rng_seed", s.spec.rng_seed},
              {"instance_count", res.truth.instance_count},
              {"seeds", seeds}},
             truth_path);
  std::cout << "instance_count: " << res.truth.instance_count << "\n";
  return 0;
}

// ---- config handling ------------------------------------------------------

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::istringstream is(amap::read_text_file(path));
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw amap::Error(amap::ErrorCode::InvalidArgument,
                        path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(key.begin());
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

// Appends config values for options of `sub` that the command line leaves
// unset. Keys the subcommand does not know are skipped, so one file can
// serve several subcommands.
void inject_config(CLI::App* sub, std::vector<std::string>& args) {
  const auto path = find_config_path(args);
  if (!path) return;
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config(*path)) {
    if (key == "config") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) continue;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
    });
    if (!given) extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Podocyte foot-process morphometry post-processing"};
  app.set_version_flag("--version", std::string(amap::kToolVersion));
  app.require_subcommand(1);

  CommonFlags common;

  SegmentArgs seg;
  auto* s_seg = app.add_subcommand("segment", "Tile, segment, stitch and label instances");
  auto* seg_input = s_seg->add_option("--input", seg.input, "Input TIFF");
  s_seg->add_option("--batch", seg.batch, "Directory of TIFFs, one manifest per image")
      ->excludes(seg_input);
  s_seg->add_option("--provider", seg.provider, "mask:<path> or synth:<spec>")->required();
  s_seg->add_option("--out", seg.out, "Output directory")->capture_default_str();
  add_scale_flags(s_seg, common);
  add_segment_flags(s_seg, common);
  add_config_flag(s_seg, common);

  RoiArgs roi;
  auto* s_roi = app.add_subcommand("roi", "Compute the ROI mask from a semantic map");
  s_roi->add_option("--semantic", roi.semantic, "Semantic map (0/1/2)")->required();
  s_roi->add_option("--out", roi.out, "Output directory")->capture_default_str();
  s_roi->add_option("--scale-factor", common.scale_factor, "Full resolution over map resolution")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_roi_flags(s_roi, common);
  add_config_flag(s_roi, common);

  QuantifyArgs q;
  auto* s_q = app.add_subcommand("quantify", "Per-instance morphometry and SD length density");
  s_q->add_option("--instances", q.instances, "Instance map TIFF");
  s_q->add_option("--semantic", q.semantic, "Semantic map");
  s_q->add_option("--roi", q.roi, "ROI mask (computed when omitted)");
  s_q->add_option("--input", q.input, "Run the full pipeline on this TIFF");
  s_q->add_option("--batch", q.batch, "Run the full pipeline on every TIFF in a directory");
  s_q->add_option("--provider", q.provider, "Provider for --input/--batch");
  s_q->add_option("--aggregate", q.aggregate, "Per-image summary in batch mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean", "median"}));
  s_q->add_option("--out", q.out, "Output directory")->capture_default_str();
  add_scale_flags(s_q, common);
  add_segment_flags(s_q, common);
  add_roi_flags(s_q, common);
  add_config_flag(s_q, common);

  CompareArgs cmp;
  auto* s_cmp = app.add_subcommand("compare", "Pearson, Bland-Altman and TOST between two feature tables");
  s_cmp->add_option("--a", cmp.a, "Feature CSV of method A")->required();
  s_cmp->add_option("--b", cmp.b, "Feature CSV of method B")->required();
  s_cmp->add_option("--margin", cmp.margin, "Equivalence margin as a fraction of the basis mean")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_cmp->add_option("--margin-basis", cmp.basis, "Series whose mean sets the margin")
      ->required()
      ->check(CLI::IsMember({"a", "b"}));
  s_cmp->add_option("--out", cmp.out, "Output directory")->capture_default_str();
  add_config_flag(s_cmp, common);

  BenchArgs bench;
  auto* s_bench = app.add_subcommand("bench", "Time the pipeline stages");
  s_bench->add_option("--input", bench.input, "Input TIFF (default: synthetic map)");
  s_bench->add_option("--provider", bench.provider, "Provider spec");
  s_bench->add_option("--iterations", bench.iterations, "Timed iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_bench->add_option("--warmup", bench.warmup, "Untimed warm-up runs")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  s_bench->add_option("--synth-size", bench.synth_size, "Side of the default synthetic map")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_bench->add_option("--baseline-mean", bench.baseline_mean, "Baseline mean seconds for the speedup ratio");
  s_bench->add_flag("--svg", bench.svg, "Also write a bar chart of stage means");
  s_bench->add_option("--out", bench.out, "Output directory")->capture_default_str();
  add_scale_flags(s_bench, common);
  add_segment_flags(s_bench, common);
  add_roi_flags(s_bench, common);
  add_config_flag(s_bench, common);

  SynthArgs syn;
  auto* s_syn = app.add_subcommand("synth", "Write a Voronoi semantic fixture and its ground truth");
  s_syn->add_option("--width", syn.spec.width)->capture_default_str()->check(CLI::PositiveNumber);
  s_syn->add_option("--height", syn.spec.height)->capture_default_str()->check(CLI::PositiveNumber);
  s_syn->add_option("--seeds", syn.spec.n_seeds)->capture_default_str()->check(CLI::PositiveNumber);
  s_syn->add_option("--thickness", syn.spec.sd_thickness)->capture_default_str()->check(CLI::PositiveNumber);
  s_syn->add_option("--seed", syn.spec.rng_seed)->capture_default_str();
  s_syn->add_option("--out", syn.out, "Semantic map path (.tif or .png)")->required();
  s_syn->add_option("--truth", syn.truth, "Ground-truth JSON (default: <out>.truth.json)");
  add_config_flag(s_syn, common);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty()) {
      for (auto* sub : app.get_subcommands({})) {
        if (sub->get_name() == args.front()) inject_config(sub, args);
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kParseFailure;
  } catch (const amap::Error& e) {
    std::cerr << "error [" << amap::to_string(e.code()) << "]: " << e.what() << "\n";
    return amap::exit_code(e.code());
  }

  try {
    if (s_seg->parsed()) {
      if (!seg.input && !seg.batch && seg.provider.rfind("mask:", 0) != 0) {
        throw amap::Error(amap::ErrorCode::InvalidArgument, "--input or --batch is required");
      }
      return cmd_segment(seg, common);
    }
    if (s_roi->parsed()) return cmd_roi(roi, common);
    if (s_q->parsed()) return cmd_quantify(q, common);
    if (s_cmp->parsed()) return cmd_compare(cmp);
    if (s_bench->parsed()) return cmd_bench(bench, common);
    if (s_syn->parsed()) return cmd_synth(syn);
  } catch (const amap::Error& e) {
    std::cerr << "error [" << amap::to_string(e.code()) << "]: " << e.what() << "\n";
    return amap::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpectedFailure;
  }
  return 0;
}
