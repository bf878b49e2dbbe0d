#pragma once

// Method-agreement statistics: Pearson correlation, Bland-Altman limits of
// agreement and paired two one-sided t-tests (TOST) for equivalence.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amap/error.hpp"

namespace amap::stats {

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool operator==(const Interval&) const = default;
};

/// Two equally long measurement series of the same items.
class PairedSeries {
 public:
  PairedSeries(std::vector<double> a, std::vector<double> b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.size() != b_.size()) {
      throw Error(ErrorCode::InvalidArgument, "paired series differ in length");
    }
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (!std::isfinite(a_[i]) || !std::isfinite(b_[i])) {
        throw Error(ErrorCode::InvalidArgument, "paired series contain a non-finite value");
      }
    }
  }

  std::span<const double> a() const noexcept { return a_; }
  std::span<const double> b() const noexcept { return b_; }
  std::size_t size() const noexcept { return a_.size(); }

  std::vector<double> differences() const {
    std::vector<double> d(a_.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a_[i] - b_[i];
    return d;
  }

 private:
  std::vector<double> a_;
  std::vector<double> b_;
};

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample (n - 1) standard deviation.
inline double sample_sd(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
/// separately avoids cancellation when x is close to 1.
inline double incomplete_beta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, y) / b;
}

/// Student-t cumulative distribution with `df` degrees of freedom.
inline double t_cdf(double t, double df) {
  if (!(df >= 1.0) || !std::isfinite(df)) {
    throw Error(ErrorCode::InvalidDf, "degrees of freedom must be >= 1");
  }
  if (std::isnan(t)) throw Error(ErrorCode::InvalidArgument, "t is NaN");
  if (t == std::numeric_limits<double>::infinity()) return 1.0;
  if (t == -std::numeric_limits<double>::infinity()) return 0.0;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x, y);
  return t > 0.0 ? 1.0 - tail : tail;
}

/// Inverse of t_cdf by bisection; `p` in (0, 1).
inline double t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must be in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -1.0;
  double hi = 1.0;
  while (t_cdf(lo, df) > p) lo *= 2.0;
  while (t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct PearsonResult {
  double r = 0.0;
  double t = 0.0;
  double p = 1.0;  ///< two-sided
  std::size_t n = 0;
};

inline PearsonResult pearson(const PairedSeries& s) {
  const std::size_t n = s.size();
  if (n < 3) throw Error(ErrorCode::TooFewPoints, "pearson needs at least 3 pairs");
  const double ma = mean(s.a());
  const double mb = mean(s.b());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = s.a()[i] - ma;
    const double db = s.b()[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::ZeroVariance, "a series is constant");
  PearsonResult res;
  res.n = n;
  res.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::fabs(res.r) == 1.0) {
    res.t = std::copysign(std::numeric_limits<double>::infinity(), res.r);
    res.p = 0.0;
    return res;
  }
  res.t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
  res.p = 2.0 * t_cdf(-std::fabs(res.t), df);
  return res;
}

struct BlandAltmanPoint {
  double mean = 0.0;
  double diff = 0.0;
};

struct BlandAltmanResult {
  double bias = 0.0;
  double sd = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  std::vector<BlandAltmanPoint> points;
};

inline constexpr double kLoaZ = 1.96;

/// Bias and 95% limits of agreement of a - b.
inline BlandAltmanResult bland_altman(const PairedSeries& s) {
  if (s.size() < 2) throw Error(ErrorCode::TooFewPoints, "Bland-Altman needs at least 2 pairs");
  const auto d = s.differences();
  BlandAltmanResult res;
  res.bias = mean(d);
  res.sd = sample_sd(d);
  res.loa_low = res.bias - kLoaZ * res.sd;
  res.loa_high = res.bias + kLoaZ * res.sd;
  res.points.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    res.points.push_back({0.5 * (s.a()[i] + s.b()[i]), d[i]});
  }
  return res;
}

/// "bias -0.00, LoA -0.04 to 0.04"
inline std::string format_bland_altman(const BlandAltmanResult& r, int decimals = 2) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "bias %.*f, LoA %.*f to %.*f", decimals, r.bias, decimals,
                r.loa_low, decimals, r.loa_high);
  return buf;
}

inline constexpr double kAlpha = 0.05;

struct TostResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double se = 0.0;
  double df = 0.0;
  double margin = 0.0;
  Interval bounds;
  double t_lower = 0.0;
  double t_upper = 0.0;
  double p_lower = 1.0;
  double p_upper = 1.0;
  double p_tost = 1.0;
  Interval ci90;
  Interval ci95;
  bool equivalent = false;
};

/// Paired TOST of the differences a - b against (-margin, +margin).
///
/// With zero spread of the differences the t statistics are undefined; the
/// verdict is then |mean| < margin and each one-sided p is 0 or 1.
inline TostResult tost_paired(const PairedSeries& s, double margin) {
  const std::size_t n = s.size();
  if (n < 3) throw Error(ErrorCode::TooFewPoints, "TOST needs at least 3 pairs");
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw Error(ErrorCode::NonpositiveMargin, "equivalence margin must be positive");
  }
  const auto d = s.differences();
  TostResult res;
  res.n = n;
  res.mean_diff = mean(d);
  res.sd_diff = sample_sd(d);
  res.se = res.sd_diff / std::sqrt(static_cast<double>(n));
  res.df = static_cast<double>(n - 1);
  res.margin = margin;
  res.bounds = {-margin, margin};

  if (res.se == 0.0) {
    const double inf = std::numeric_limits<double>::infinity();
    res.t_lower = res.mean_diff > -margin ? inf : -inf;
    res.t_upper = res.mean_diff < margin ? -inf : inf;
    res.p_lower = res.mean_diff > -margin ? 0.0 : 1.0;
    res.p_upper = res.mean_diff < margin ? 0.0 : 1.0;
    res.ci90 = res.ci95 = {res.mean_diff, res.mean_diff};
  } else {
    res.t_lower = (res.mean_diff + margin) / res.se;
    res.t_upper = (res.mean_diff - margin) / res.se;
    res.p_lower = t_cdf(-res.t_lower, res.df);
    res.p_upper = t_cdf(res.t_upper, res.df);
    const double q90 = t_quantile(1.0 - kAlpha, res.df);
    const double q95 = t_quantile(1.0 - kAlpha / 2.0, res.df);
    res.ci90 = {res.mean_diff - q90 * res.se, res.mean_diff + q90 * res.se};
    res.ci95 = {res.mean_diff - q95 * res.se, res.mean_diff + q95 * res.se};
  }
  res.p_tost = std::max(res.p_lower, res.p_upper);
  res.equivalent = res.p_tost < kAlpha;
  return res;
}

/// True iff `ci` lies inside `bounds`.
inline bool equivalence_decision(Interval ci, Interval bounds) {
  if (ci.low > ci.high || bounds.low > bounds.high) {
    throw Error(ErrorCode::InvalidArgument, "interval with low > high");
  }
  return ci.low >= bounds.low && ci.high <= bounds.high;
}

/// Absolute margin as a fraction of the mean of the reference series.
inline double equivalence_margin(double fraction, std::span<const double> reference) {
  if (reference.empty()) throw Error(ErrorCode::TooFewPoints, "empty reference series");
  return fraction * std::fabs(mean(reference));
}

}  // namespace amap::stats
