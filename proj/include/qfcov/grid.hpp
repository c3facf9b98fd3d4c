#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfcov/errors.hpp"

namespace qfcov {

/// Trapezoidal quadrature weights for ordered points. Endpoint weights are
/// half the adjacent spacing, so the weights sum to points.back() - points.front().
inline std::vector<double> trapezoid_weights(std::span<const double> points) {
  const std::size_t n = points.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double h = points[j + 1] - points[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

/// J ordered time points on [a, b] together with quadrature weights.
/// Every surface and curve in the library is discretized on one Grid.
class Grid {
 public:
  Grid(double a, double b, std::vector<double> points, std::vector<double> weights)
      : a_(a), b_(b), points_(std::move(points)), weights_(std::move(weights)) {
    validate();
  }

  /// J equispaced points a, a + h, ..., b with trapezoid weights.
  static Grid uniform(double a, double b, std::size_t size) {
    if (size < 2) throw ValidationError("grid needs at least 2 points");
    if (!(a < b)) throw ValidationError("grid requires a < b");
    std::vector<double> pts(size);
    const double h = (b - a) / static_cast<double>(size - 1);
    for (std::size_t j = 0; j < size; ++j) pts[j] = a + h * static_cast<double>(j);
    pts.back() = b;
    auto w = trapezoid_weights(pts);
    return Grid(a, b, std::move(pts), std::move(w));
  }

  /// Grid spanning [points.front(), points.back()] with trapezoid weights.
  static Grid from_points(std::vector<double> points) {
    if (points.size() < 2) throw ValidationError("grid needs at least 2 points");
    const double a = points.front();
    const double b = points.back();
    auto w = trapezoid_weights(points);
    return Grid(a, b, std::move(points), std::move(w));
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double length() const { return b_ - a_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  double point(std::size_t j) const { return points_[j]; }
  double weight(std::size_t j) const { return weights_[j]; }

  bool operator==(const Grid&) const = default;

 private:
  void validate() const {
    if (!(a_ < b_)) throw ValidationError("grid requires a < b");
    if (points_.size() < 2) throw ValidationError("grid needs at least 2 points");
    if (weights_.size() != points_.size())
      throw ValidationError("grid weights and points differ in length");
    if (points_.front() < a_ || points_.back() > b_)
      throw ValidationError("grid points fall outside [a, b]");
    for (std::size_t j = 0; j + 1 < points_.size(); ++j) {
      if (!(points_[j] < points_[j + 1]))
        throw ValidationError("grid points must be strictly increasing (index " +
                              std::to_string(j + 1) + ")");
    }
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("grid weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - length()) > 1e-12 * length())
      throw ValidationError("grid weights must sum to b - a");
  }

  double a_;
  double b_;
  std::vector<double> points_;
  std::vector<double> weights_;
};

}  // namespace qfcov
