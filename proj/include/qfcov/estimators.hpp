#pragma once

#include <cstddef>

#include "qfcov/dataset.hpp"

namespace qfcov {

/// Pointwise mean of the group's curves.
inline Curve group_mean(const FunctionalGroup& group) {
  return Curve{group.curves().colwise().mean().transpose()};
}

/// Subject-effect functions: each curve minus the group mean. Columns sum to zero.
inline EffectMatrix subject_effects(const FunctionalGroup& group) {
  const Vector mean = group_mean(group).values;
  return EffectMatrix{group.curves().rowwise() - mean.transpose()};
}

/// Unbiased sample covariance surface with divisor n_i - 1.
inline CovSurface group_cov(const FunctionalGroup& group) {
  const Matrix v = subject_effects(group).values;
  const Matrix cross = (v.transpose() * v) / static_cast<double>(group.size() - 1);
  // Mirror the upper triangle so the surface is exactly symmetric.
  Matrix cov = cross.selfadjointView<Eigen::Upper>();
  return CovSurface{std::move(cov)};
}

/// Pooled covariance sum_i (n_i - 1) gamma_i / (n - k).
inline CovSurface pooled_cov(const FunctionalDataset& data) {
  const std::size_t n = data.total_size();
  const std::size_t k = data.num_groups();
  if (n <= k) throw ValidationError("pooled covariance needs n > k");
  const auto J = static_cast<Eigen::Index>(data.grid_size());
  Matrix acc = Matrix::Zero(J, J);
  for (const auto& g : data.groups())
    acc += static_cast<double>(g.size() - 1) * group_cov(g).values;
  return CovSurface{acc / static_cast<double>(n - k)};
}

/// All groups' subject effects stacked in group order (n x J).
inline Matrix effects_pool(const FunctionalDataset& data) {
  Matrix pool(static_cast<Eigen::Index>(data.total_size()),
              static_cast<Eigen::Index>(data.grid_size()));
  Eigen::Index row = 0;
  for (const auto& g : data.groups()) {
    const auto rows = static_cast<Eigen::Index>(g.size());
    pool.middleRows(row, rows) = subject_effects(g).values;
    row += rows;
  }
  return pool;
}

}  // namespace qfcov
