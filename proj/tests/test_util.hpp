#pragma once

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "qfcov/qfcov.hpp"

namespace qfcov::testing {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline FunctionalDataset make_dataset(std::vector<Matrix> groups, std::optional<Grid> grid = std::nullopt) {
  const auto J = static_cast<std::size_t>(groups.front().cols());
  std::vector<FunctionalGroup> gs;
  for (std::size_t i = 0; i < groups.size(); ++i) gs.emplace_back("g" + std::to_string(i + 1), groups[i]);
  return FunctionalDataset(grid ? *grid : Grid::uniform(0.0, 1.0, J), std::move(gs));
}

/// Gaussian noise dataset with per-group scale, for property checks.
inline FunctionalDataset random_dataset(std::uint64_t seed, std::vector<std::size_t> sizes, std::size_t J,
                                        double a = 0.0, double b = 1.0) {
  Xoshiro256 rng(seed);
  boost::random::normal_distribution<double> z;
  std::vector<Matrix> groups;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    Matrix m(static_cast<Eigen::Index>(sizes[i]), static_cast<Eigen::Index>(J));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (1.0 + 0.3 * static_cast<double>(i)) * z(rng) + 0.1 * static_cast<double>(c);
    groups.push_back(m);
  }
  return make_dataset(groups, Grid::uniform(a, b, J));
}

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(QFCOV_TEST_DATA_DIR) / name;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace qfcov::testing
