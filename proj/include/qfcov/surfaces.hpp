#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "qfcov/dataset.hpp"
#include "qfcov/estimators.hpp"

namespace qfcov {

/// Default relative floor for SSE cells (fraction of the largest SSE cell).
inline constexpr double kDefaultSseFloor = 1e-12;

/// Pointwise quasi-F ratio surface.
struct FSurface {
  Matrix values;
  /// Number of cells whose SSE was raised to the floor.
  std::size_t eps_hits = 0;
};

/// Integrated and supremum summaries of a surface.
struct GlobalStats {
  double t_n = 0.0;
  double f_max = 0.0;
  std::size_t argmax_row = 0;
  std::size_t argmax_col = 0;
};

/// Between-group covariance discrepancy sum_i (n_i - 1)(gamma_i - gamma)^2 at every cell.
inline Matrix ssb_surface(const FunctionalDataset& data) {
  const CovSurface pooled = pooled_cov(data);
  const auto J = static_cast<Eigen::Index>(data.grid_size());
  Matrix ssb = Matrix::Zero(J, J);
  for (const auto& g : data.groups()) {
    const Matrix diff = group_cov(g).values - pooled.values;
    ssb += static_cast<double>(g.size() - 1) * diff.cwiseAbs2();
  }
  return ssb;
}

/// Within-group dispersion of the products v_ij(s) v_ij(t) around gamma_i(s, t).
inline Matrix sse_surface(const FunctionalDataset& data) {
  const auto J = static_cast<Eigen::Index>(data.grid_size());
  Matrix sse = Matrix::Zero(J, J);
  for (const auto& g : data.groups()) {
    const Matrix v = subject_effects(g).values;
    const Matrix cov = group_cov(g).values;
    for (Eigen::Index j = 0; j < v.rows(); ++j) {
      for (Eigen::Index s = 0; s < J; ++s) {
        const double vs = v(j, s);
        for (Eigen::Index t = 0; t < J; ++t) {
          const double d = vs * v(j, t) - cov(s, t);
          sse(s, t) += d * d;
        }
      }
    }
  }
  return sse;
}

/// Ratio (SSB / (k - 1)) / (SSE / (n - k)) with SSE floored at eps * max(SSE).
///
/// Throws DegenerateDataError when SSE vanishes on every cell; the floor is
/// only meaningful relative to a nonzero scale.
inline FSurface quasi_f_from_parts(const Matrix& ssb, const Matrix& sse, std::size_t k,
                                   std::size_t n, double eps = kDefaultSseFloor) {
  if (k < 2 || n <= k) throw ValidationError("quasi-F surface needs k >= 2 and n > k");
  if (eps < 0.0) throw ValidationError("SSE floor must be nonnegative");
  const double max_sse = sse.maxCoeff();
  if (!(max_sse > 0.0))
    throw DegenerateDataError("SSE surface is identically zero; the quasi-F ratio is undefined");
  const double floor = eps * max_sse;
  const double between = 1.0 / static_cast<double>(k - 1);
  const double within = 1.0 / static_cast<double>(n - k);
  FSurface out{Matrix(ssb.rows(), ssb.cols()), 0};
  for (Eigen::Index s = 0; s < ssb.rows(); ++s) {
    for (Eigen::Index t = 0; t < ssb.cols(); ++t) {
      double denom = sse(s, t);
      if (denom <= floor) {
        denom = floor;
        ++out.eps_hits;
      }
      const double num = ssb(s, t) * between;
      if (denom > 0.0)
        out.values(s, t) = num / (denom * within);
      else
        out.values(s, t) = num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
  }
  return out;
}

inline FSurface quasi_f_surface(const FunctionalDataset& data, double eps = kDefaultSseFloor) {
  return quasi_f_from_parts(ssb_surface(data), sse_surface(data), data.num_groups(),
                            data.total_size(), eps);
}

/// Tensor-product quadrature sum_{j,l} w_j w_l M(j, l).
inline double integrate_surface(const Matrix& m, const Grid& grid) {
  const Eigen::Map<const Vector> w(grid.weights().data(),
                                   static_cast<Eigen::Index>(grid.size()));
  return w.dot(m * w);
}

/// Maximum over cells; ties resolve to the smallest row, then column.
inline GlobalStats surface_max(const Matrix& m) {
  GlobalStats g;
  g.f_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      if (m(s, t) > g.f_max) {
        g.f_max = m(s, t);
        g.argmax_row = static_cast<std::size_t>(s);
        g.argmax_col = static_cast<std::size_t>(t);
      }
    }
  }
  return g;
}

inline GlobalStats globalize(const FSurface& surface, const Grid& grid) {
  if (static_cast<std::size_t>(surface.values.rows()) != grid.size() ||
      static_cast<std::size_t>(surface.values.cols()) != grid.size())
    throw ValidationError("surface dimensions do not match the grid");
  GlobalStats g = surface_max(surface.values);
  g.t_n = integrate_surface(surface.values, grid);
  return g;
}

}  // namespace qfcov
