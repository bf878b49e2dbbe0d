#pragma once

// Stage timing over repeated pipeline iterations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amap/error.hpp"

namespace amap::bench {

/// Monotonic time source in seconds. Tests inject scripted clocks.
using Clock = std::function<double()>;

inline double steady_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

struct SampleSummary {
  double mean = 0.0;
  std::optional<double> stddev;  ///< absent for a single sample
};

inline SampleSummary summarize_samples(const std::vector<double>& xs) {
  if (xs.empty()) throw Error(ErrorCode::InvalidArgument, "no samples");
  SampleSummary s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct StageTiming {
  std::string name;
  std::vector<double> seconds;

  SampleSummary summary() const { return summarize_samples(seconds); }
};

struct BenchReport {
  std::vector<StageTiming> stages;
  StageTiming end_to_end{"end_to_end", {}};
  bool valid = true;
  std::string error;
  std::optional<double> speedup_vs_baseline;
};

struct Stage {
  std::string name;
  std::function<void()> run;
};

/// Ratio of mean execution times, baseline over candidate.
inline double speedup(double baseline_mean, double candidate_mean) {
  if (!(candidate_mean > 0.0) || !(baseline_mean >= 0.0)) {
    throw Error(ErrorCode::NonpositiveTime, "execution times must be positive");
  }
  return baseline_mean / candidate_mean;
}

/// Runs `warmup` untimed passes, then `iterations` timed passes. Stages run
/// serially in order within a pass; each pass is also timed end to end. An
/// exception stops the run and returns what was measured with `valid` unset.
inline BenchReport run_benchmark(const std::vector<Stage>& stages, int iterations, int warmup,
                                 const Clock& clock = steady_seconds) {
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
  if (warmup < 0) throw Error(ErrorCode::InvalidArgument, "warmup must be >= 0");
  BenchReport report;
  for (const auto& s : stages) report.stages.push_back({s.name, {}});
  try {
    for (int i = 0; i < warmup; ++i) {
      for (const auto& s : stages) s.run();
    }
    for (int i = 0; i < iterations; ++i) {
      const double begin = clock();
      for (std::size_t k = 0; k < stages.size(); ++k) {
        const double t0 = clock();
        stages[k].run();
        report.stages[k].seconds.push_back(clock() - t0);
      }
      report.end_to_end.seconds.push_back(clock() - begin);
    }
  } catch (const std::exception& e) {
    report.valid = false;
    report.error = e.what();
  }
  return report;
}

inline void write_csv(const BenchReport& report, std::ostream& os) {
  os << "stage,iteration,seconds\n";
  auto emit = [&](const StageTiming& st) {
    for (std::size_t i = 0; i < st.seconds.size(); ++i) {
      os << st.name << ',' << i << ',' << nlohmann::json(st.seconds[i]).dump() << '\n';
    }
  };
  for (const auto& st : report.stages) emit(st);
  emit(report.end_to_end);
}

inline nlohmann::json to_json(const BenchReport& report) {
  auto stage_json = [](const StageTiming& st) {
    nlohmann::json j{{"stage", st.name}, {"iterations", st.seconds.size()}, {"seconds", st.seconds}};
    if (!st.seconds.empty()) {
      const auto s = st.summary();
      j["mean"] = s.mean;
      j["stddev"] = s.stddev ? nlohmann::json(*s.stddev) : nlohmann::json(nullptr);
    }
    return j;
  };
  nlohmann::json j;
  j["valid"] = report.valid;
  if (!report.valid) j["error"] = report.error;
  j["stages"] = nlohmann::json::array();
  for (const auto& st : report.stages) j["stages"].push_back(stage_json(st));
  j["end_to_end"] = stage_json(report.end_to_end);
  j["speedup_vs_baseline"] =
      report.speedup_vs_baseline ? nlohmann::json(*report.speedup_vs_baseline) : nlohmann::json(nullptr);
  return j;
}

/// Horizontal bar chart of stage means.
inline std::string to_svg(const BenchReport& report) {
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& st : report.stages) {
    if (!st.seconds.empty()) bars.emplace_back(st.name, st.summary().mean);
  }
  if (!report.end_to_end.seconds.empty()) {
    bars.emplace_back(report.end_to_end.name, report.end_to_end.summary().mean);
  }
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.second);
  constexpr int kLabelWidth = 140;
  constexpr int kBarArea = 400;
  constexpr int kRow = 28;
  const int height = static_cast<int>(bars.size()) * kRow + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLabelWidth + kBarArea + 120
     << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int y = 10 + static_cast<int>(i) * kRow;
    const double frac = top > 0.0 ? bars[i].second / top : 0.0;
    const int len = static_cast<int>(std::lround(frac * kBarArea));
    os << "  <text x=\"4\" y=\"" << y + 15 << "\">" << bars[i].first << "</text>\n";
    os << "  <rect x=\"" << kLabelWidth << "\" y=\"" << y << "\" width=\"" << len
       << "\" height=\"20\" fill=\"#4c72b0\"/>\n";
    char label[64];
    std::snprintf(label, sizeof label, "%.4f s", bars[i].second);
    os << "  <text x=\"" << kLabelWidth + len + 6 << "\" y=\"" << y + 15 << "\">" << label
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace amap::bench
