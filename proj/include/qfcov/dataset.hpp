#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qfcov/errors.hpp"
#include "qfcov/grid.hpp"

namespace qfcov {

/// Dense row-major storage; a row of a group matrix is one curve.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A single function sampled on the grid, e.g. a group mean.
struct Curve {
  Vector values;
};

/// Covariance function discretized on grid x grid.
struct CovSurface {
  Matrix values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t s, std::size_t t) const {
    return values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
  }
  bool is_symmetric(double tol = 1e-10) const {
    return values.rows() == values.cols() &&
           (values - values.transpose()).cwiseAbs().maxCoeff() <= tol;
  }
};

/// Centered curves v_ij = y_ij - ybar_i of one group (n_i x J).
struct EffectMatrix {
  Matrix values;
};

/// One functional sample: n_i curves (rows) on a J-point grid (columns).
class FunctionalGroup {
 public:
  FunctionalGroup(std::string label, Matrix curves)
      : label_(std::move(label)), curves_(std::move(curves)) {
    if (curves_.rows() < 2)
      throw ValidationError("group '" + label_ + "' needs at least 2 curves, got " +
                            std::to_string(curves_.rows()));
    if (curves_.cols() < 1) throw ValidationError("group '" + label_ + "' has no grid columns");
    if (!curves_.allFinite())
      throw ValidationError("group '" + label_ + "' contains non-finite values");
  }

  const std::string& label() const { return label_; }
  const Matrix& curves() const { return curves_; }
  std::size_t size() const { return static_cast<std::size_t>(curves_.rows()); }
  std::size_t grid_size() const { return static_cast<std::size_t>(curves_.cols()); }

 private:
  std::string label_;
  Matrix curves_;
};

/// k >= 2 groups sharing one grid.
class FunctionalDataset {
 public:
  FunctionalDataset(Grid grid, std::vector<FunctionalGroup> groups)
      : grid_(std::move(grid)), groups_(std::move(groups)) {
    if (groups_.size() < 2)
      throw ValidationError("dataset needs at least 2 groups, got " + std::to_string(groups_.size()));
    for (const auto& g : groups_) {
      if (g.grid_size() != grid_.size())
        throw ValidationError("group '" + g.label() + "' has " + std::to_string(g.grid_size()) +
                              " columns but the grid has " + std::to_string(grid_.size()) +
                              " points");
    }
  }

  const Grid& grid() const { return grid_; }
  const std::vector<FunctionalGroup>& groups() const { return groups_; }
  const FunctionalGroup& group(std::size_t i) const { return groups_[i]; }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t grid_size() const { return grid_.size(); }

  /// Total sample size n = sum of n_i.
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& g : groups_) n += g.size();
    return n;
  }

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(groups_.size());
    for (const auto& g : groups_) sizes.push_back(g.size());
    return sizes;
  }

 private:
  Grid grid_;
  std::vector<FunctionalGroup> groups_;
};

/// Sub-dataset with the named groups, in the order given.
inline FunctionalDataset select_groups(const FunctionalDataset& data,
                                       const std::vector<std::string>& labels) {
  std::vector<FunctionalGroup> picked;
  for (const auto& label : labels) {
    bool found = false;
    for (const auto& g : data.groups()) {
      if (g.label() == label) {
        picked.push_back(g);
        found = true;
        break;
      }
    }
    if (!found) throw ValidationError("no group labelled '" + label + "'");
  }
  return FunctionalDataset(data.grid(), std::move(picked));
}

/// Pointwise product c(t) * y(t) applied to every curve.
inline FunctionalDataset scale_curves(const FunctionalDataset& data, const Vector& c) {
  if (static_cast<std::size_t>(c.size()) != data.grid_size())
    throw ValidationError("scale curve length does not match the grid");
  std::vector<FunctionalGroup> groups;
  for (const auto& g : data.groups()) {
    Matrix scaled = g.curves() * c.asDiagonal();
    groups.emplace_back(g.label(), std::move(scaled));
  }
  return FunctionalDataset(data.grid(), std::move(groups));
}

}  // namespace qfcov
