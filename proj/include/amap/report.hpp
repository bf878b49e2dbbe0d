#pragma once

// Table and JSON artifacts: morphometry CSV + sidecar, per-image feature
// tables, the method-comparison report and run manifests.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amap/error.hpp"
#include "amap/morphometry.hpp"
#include "amap/roidetect.hpp"
#include "amap/stats.hpp"

namespace amap {

inline constexpr const char* kToolName = "amap-app";
inline constexpr const char* kToolVersion = "1.0.0";

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string morphometry_csv(const MorphometryTable& table) {
  std::ostringstream os;
  os << "instance_id,area_um2,perimeter_um,circularity\n";
  for (const auto& r : table.records) {
    os << r.instance_id << ',' << format_double(r.area_um2) << ',' << format_double(r.perimeter_um) << ','
       << format_double(r.circularity) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const RoiParams& p) {
  return {{"dilation_radius", p.dilation_radius},
          {"dilation_iterations", p.dilation_iterations},
          {"erosion_iterations", p.erosion_iterations},
          {"min_component_area", p.min_component_area},
          {"connectivity", static_cast<int>(p.connectivity)}};
}

inline nlohmann::ordered_json to_json(const FeatureSummary& s) {
  return {{"instances", s.instances},
          {"area_um2", s.area_um2},
          {"perimeter_um", s.perimeter_um},
          {"circularity", s.circularity}};
}

/// Sidecar for the morphometry CSV.
inline nlohmann::ordered_json morphometry_json(const MorphometryTable& table, const RoiParams& roi_params) {
  nlohmann::ordered_json j;
  j["instance_count"] = table.records.size();
  j["sd_length_um"] = table.sd_length_um;
  j["roi_area_um2"] = table.roi_area_um2;
  j["sd_length_density_per_um"] =
      table.sd_length_density ? nlohmann::ordered_json(*table.sd_length_density) : nlohmann::ordered_json(nullptr);
  j["empty_roi"] = table.empty_roi();
  j["pixel_size_um"] = table.pixel_size_um;
  j["roi_params"] = to_json(roi_params);
  j["aggregates"] = {{"mean", to_json(summarize(table, Aggregation::Mean))},
                     {"median", to_json(summarize(table, Aggregation::Median))}};
  return j;
}

/// Per-image feature values keyed by the first column.
struct FeatureTable {
  std::string key_column;
  std::vector<std::string> features;
  std::map<std::string, std::vector<double>> rows;  ///< values in `features` order

  std::optional<double> value(const std::string& key, const std::string& feature) const {
    auto it = rows.find(key);
    if (it == rows.end()) return std::nullopt;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i] == feature) return it->second[i];
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline FeatureTable parse_feature_csv(const std::string& text, const std::string& what = "csv") {
  std::istringstream is(text);
  std::string line;
  FeatureTable t;
  if (!std::getline(is, line)) throw Error(ErrorCode::InvalidArgument, what + ": empty file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw Error(ErrorCode::InvalidArgument, what + ": need a key column and features");
  t.key_column = header.front();
  t.features.assign(header.begin() + 1, header.end());
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::InvalidArgument, what + ":" + std::to_string(line_no) + ": wrong column count");
    }
    std::vector<double> values;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      double v = 0.0;
      const auto& c = cells[i];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc{} || ptr != c.data() + c.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    what + ":" + std::to_string(line_no) + ": not a number: '" + c + "'");
      }
      values.push_back(v);
    }
    if (!t.rows.emplace(cells.front(), std::move(values)).second) {
      throw Error(ErrorCode::InvalidArgument, what + ": duplicate key '" + cells.front() + "'");
    }
  }
  return t;
}

inline FeatureTable read_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_text_file(path), path.string());
}

/// Which series the equivalence margin is a fraction of.
enum class MarginBasis { A, B };

struct CompareParams {
  double margin_fraction = 0.10;
  MarginBasis basis = MarginBasis::A;
};

struct FeatureComparison {
  std::string feature;
  std::size_t n = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  stats::PearsonResult pearson;
  stats::BlandAltmanResult bland_altman;
  stats::TostResult tost;
  bool ci95_within_bounds = false;
};

struct StatsReport {
  CompareParams params;
  std::vector<std::string> keys;
  std::vector<FeatureComparison> features;
};

/// Pairs rows by key and runs Pearson, Bland-Altman and TOST per shared
/// feature. Differences are a - b. Both tables must hold the same keys.
inline StatsReport compare_tables(const FeatureTable& a, const FeatureTable& b, const CompareParams& params) {
  std::set<std::string> ka, kb;
  for (const auto& [k, v] : a.rows) ka.insert(k);
  for (const auto& [k, v] : b.rows) kb.insert(k);
  if (ka != kb) {
    std::string missing;
    for (const auto& k : ka) if (!kb.count(k)) missing += " -" + k;
    for (const auto& k : kb) if (!ka.count(k)) missing += " +" + k;
    throw Error(ErrorCode::KeyMismatch, "image keys differ:" + missing);
  }
  StatsReport report;
  report.params = params;
  report.keys.assign(ka.begin(), ka.end());
  for (const auto& feature : a.features) {
    if (std::find(b.features.begin(), b.features.end(), feature) == b.features.end()) continue;
    std::vector<double> va, vb;
    for (const auto& k : report.keys) {
      va.push_back(*a.value(k, feature));
      vb.push_back(*b.value(k, feature));
    }
    stats::PairedSeries s(va, vb);
    FeatureComparison fc;
    fc.feature = feature;
    fc.n = s.size();
    if (fc.n == 0) throw Error(ErrorCode::TooFewPoints, "no rows to compare");
    fc.mean_a = stats::mean(s.a());
    fc.mean_b = stats::mean(s.b());
    fc.pearson = stats::pearson(s);
    fc.bland_altman = stats::bland_altman(s);
    const double margin = stats::equivalence_margin(params.margin_fraction,
                                                    params.basis == MarginBasis::A ? s.a() : s.b());
    fc.tost = stats::tost_paired(s, margin);
    fc.ci95_within_bounds = stats::equivalence_decision(fc.tost.ci95, fc.tost.bounds);
    report.features.push_back(std::move(fc));
  }
  if (report.features.empty()) throw Error(ErrorCode::KeyMismatch, "the tables share no feature columns");
  return report;
}

namespace detail {

inline nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json interval_json(stats::Interval i) { return {i.low, i.high}; }

}  // namespace detail

inline nlohmann::ordered_json to_json(const StatsReport& report) {
  nlohmann::ordered_json j;
  j["margin_fraction"] = report.params.margin_fraction;
  j["margin_basis"] = report.params.basis == MarginBasis::A ? "a" : "b";
  j["alpha"] = stats::kAlpha;
  j["n"] = report.keys.size();
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : report.features) {
    nlohmann::ordered_json fj;
    fj["feature"] = f.feature;
    fj["n"] = f.n;
    fj["mean_a"] = f.mean_a;
    fj["mean_b"] = f.mean_b;
    fj["pearson"] = {{"r", f.pearson.r}, {"t", detail::finite_or_null(f.pearson.t)}, {"p", f.pearson.p}};
    fj["bland_altman"] = {{"bias", f.bland_altman.bias},
                          {"sd", f.bland_altman.sd},
                          {"loa_low", f.bland_altman.loa_low},
                          {"loa_high", f.bland_altman.loa_high},
                          {"summary", stats::format_bland_altman(f.bland_altman)}};
    const auto& t = f.tost;
    fj["tost"] = {{"margin", t.margin},
                  {"bounds", detail::interval_json(t.bounds)},
                  {"mean_diff", t.mean_diff},
                  {"sd_diff", t.sd_diff},
                  {"se", t.se},
                  {"df", t.df},
                  {"t_lower", detail::finite_or_null(t.t_lower)},
                  {"t_upper", detail::finite_or_null(t.t_upper)},
                  {"p_lower", t.p_lower},
                  {"p_upper", t.p_upper},
                  {"p_tost", t.p_tost},
                  {"ci90", detail::interval_json(t.ci90)},
                  {"ci95", detail::interval_json(t.ci95)},
                  {"equivalent", t.equivalent}};
    fj["ci95_within_bounds"] = f.ci95_within_bounds;
    j["features"].push_back(std::move(fj));
  }
  return j;
}

/// Scatter data for external Bland-Altman plots.
inline std::string bland_altman_csv(const StatsReport& report) {
  std::ostringstream os;
  os << "feature,key,mean,diff\n";
  for (const auto& f : report.features) {
    for (std::size_t i = 0; i < f.bland_altman.points.size(); ++i) {
      const auto& p = f.bland_altman.points[i];
      os << f.feature << ',' << report.keys[i] << ',' << format_double(p.mean) << ',' << format_double(p.diff)
         << '\n';
    }
  }
  return os.str();
}

/// 64-bit FNV-1a of a file's bytes; identifies inputs in manifests.
inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  const auto bytes = read_text_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Timestamp for manifests. Honors SOURCE_DATE_EPOCH so reruns can produce
/// byte-identical manifests.
inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(epoch, epoch + std::strlen(epoch), v);
    if (ec == std::errc{}) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Everything needed to rerun a command: inputs with content hashes, the
/// provider, every parameter (defaults included) and the tool version.
/// Settings that cannot change outputs (thread count) are left out, so two
/// runs differing only in those write identical manifests.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  std::string provider;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& role, const std::filesystem::path& path) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64_file(path)));
    inputs.push_back({{"role", role},
                      {"path", path.string()},
                      {"bytes", std::filesystem::file_size(path)},
                      {"fnv1a64", hash}});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["inputs"] = inputs;
    if (!provider.empty()) j["provider"] = provider;
    j["parameters"] = parameters;
    j["outputs"] = outputs;
    j["timestamps"] = {{"started", started_at}, {"finished", finished_at}};
    return j;
  }
};

}  // namespace amap
