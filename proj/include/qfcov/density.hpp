#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "qfcov/errors.hpp"

namespace qfcov {

/// Linear-interpolation sample quantile (Hyndman-Fan type 7) of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Silverman's rule of thumb h = 0.9 min(sd, IQR / 1.34) m^(-1/5). Falls back
/// to the standard deviation alone when the IQR is zero.
inline double silverman_bandwidth(std::span<const double> sample) {
  const std::size_t m = sample.size();
  if (m < 2) throw ValidationError("bandwidth needs at least 2 observations");
  double mean = 0.0;
  for (double x : sample) mean += x;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double x : sample) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  if (!(sd > 0.0)) throw ValidationError("bandwidth is undefined for a constant sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
}

/// Gaussian-kernel density estimate at each evaluation point.
inline std::vector<double> kde(std::span<const double> sample, std::span<const double> at, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  const double norm = 1.0 / (static_cast<double>(sample.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> pdf(at.size(), 0.0);
  for (std::size_t e = 0; e < at.size(); ++e) {
    double acc = 0.0;
    for (double x : sample) {
      const double z = (at[e] - x) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    pdf[e] = acc * norm;
  }
  return pdf;
}

inline std::vector<double> kde(std::span<const double> sample, std::span<const double> at) {
  return kde(sample, at, silverman_bandwidth(sample));
}

struct DensityCurve {
  double bandwidth = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

/// KDE on `points` equispaced values spanning [min - 4h, max + 4h].
inline DensityCurve kde_curve(std::span<const double> sample, std::size_t points = 512) {
  if (points < 2) throw ValidationError("density curve needs at least 2 points");
  DensityCurve c;
  c.bandwidth = silverman_bandwidth(sample);
  const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *lo_it - 4.0 * c.bandwidth;
  const double hi = *hi_it + 4.0 * c.bandwidth;
  c.x.resize(points);
  for (std::size_t i = 0; i < points; ++i)
    c.x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  c.density = kde(sample, c.x, c.bandwidth);
  return c;
}

/// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("KS statistic needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Large-sample two-sample KS critical value c(alpha) sqrt((m + n) / (m n)),
/// c(alpha) = sqrt(-ln(alpha / 2) / 2).
inline double ks_critical_value(std::size_t m, std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double mm = static_cast<double>(m), nn = static_cast<double>(n);
  return c * std::sqrt((mm + nn) / (mm * nn));
}

}  // namespace qfcov
