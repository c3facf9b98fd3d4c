#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "qfcov/dataset.hpp"
#include "qfcov/estimators.hpp"

namespace qfcov {

enum class VarpiVariant { empirical, gaussian };

inline const char* to_string(VarpiVariant v) {
  return v == VarpiVariant::empirical ? "empirical" : "gaussian";
}

/// A point (s, t) of grid x grid, by grid index.
struct GridPair {
  std::size_t s = 0;
  std::size_t t = 0;
};

/// Covariance between the products v(s1) v(t1) and v(s2) v(t2), indexed by
/// pairs of grid pairs. Pairs are flattened as p = s * J + t, so the full
/// table is J^2 x J^2; it is never stored, only evaluated entrywise or by block.
class FourthMomentSurface {
 public:
  /// Moment estimator from the pooled subject effects. Divisor is n, not n - k.
  static FourthMomentSurface empirical(const FunctionalDataset& data) {
    FourthMomentSurface out;
    out.variant_ = VarpiVariant::empirical;
    out.J_ = data.grid_size();
    out.n_ = data.total_size();
    const Matrix pool = effects_pool(data);
    const auto J = static_cast<Eigen::Index>(out.J_);
    out.products_.resize(pool.rows(), J * J);
    for (Eigen::Index r = 0; r < pool.rows(); ++r) {
      for (Eigen::Index s = 0; s < J; ++s) {
        for (Eigen::Index t = 0; t < J; ++t) out.products_(r, s * J + t) = pool(r, s) * pool(r, t);
      }
    }
    out.pooled_ = pooled_cov(data).values;
    out.pooled_vec_ = Eigen::Map<const Vector>(out.pooled_.data(), J * J);
    const double inv_n = 1.0 / static_cast<double>(out.n_);
    out.diag_ = (out.products_.cwiseAbs2().colwise().sum().transpose() * inv_n).eval() -
                out.pooled_vec_.cwiseAbs2();
    return out;
  }

  /// Gaussian-case estimator gamma(s1, s2) gamma(t1, t2) + gamma(s1, t2) gamma(s2, t1).
  static FourthMomentSurface gaussian(const CovSurface& pooled) {
    if (!pooled.is_symmetric()) throw ValidationError("pooled covariance must be symmetric");
    FourthMomentSurface out;
    out.variant_ = VarpiVariant::gaussian;
    out.J_ = pooled.size();
    out.pooled_ = pooled.values;
    const auto J = static_cast<Eigen::Index>(out.J_);
    out.pooled_vec_ = Eigen::Map<const Vector>(out.pooled_.data(), J * J);
    out.diag_.resize(J * J);
    for (Eigen::Index s = 0; s < J; ++s) {
      for (Eigen::Index t = 0; t < J; ++t) {
        const double c = out.pooled_(s, t);
        out.diag_(s * J + t) = out.pooled_(s, s) * out.pooled_(t, t) + c * c;
      }
    }
    return out;
  }

  VarpiVariant variant() const { return variant_; }
  std::size_t grid_size() const { return J_; }
  std::size_t num_pairs() const { return J_ * J_; }
  std::size_t flat(GridPair p) const { return p.s * J_ + p.t; }
  GridPair unflat(std::size_t p) const { return {p / J_, p % J_}; }

  /// Diagonal entries, flat-indexed.
  const Vector& diag() const { return diag_; }

  double at(std::size_t p, std::size_t q) const {
    if (variant_ == VarpiVariant::empirical) {
      const auto ip = static_cast<Eigen::Index>(p);
      const auto iq = static_cast<Eigen::Index>(q);
      return products_.col(ip).dot(products_.col(iq)) / static_cast<double>(n_) -
             pooled_vec_(ip) * pooled_vec_(iq);
    }
    const GridPair a = unflat(p);
    const GridPair b = unflat(q);
    return gauss_entry(a, b);
  }

  double operator()(GridPair a, GridPair b) const { return at(flat(a), flat(b)); }

  /// Block of the flattened table: rows [row0, row0 + rows), cols [col0, col0 + cols).
  void evaluate_block(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols,
                      Matrix& out) const {
    const auto r0 = static_cast<Eigen::Index>(row0);
    const auto c0 = static_cast<Eigen::Index>(col0);
    const auto nr = static_cast<Eigen::Index>(rows);
    const auto nc = static_cast<Eigen::Index>(cols);
    out.resize(nr, nc);
    if (variant_ == VarpiVariant::empirical) {
      out.noalias() = products_.middleCols(r0, nr).transpose() * products_.middleCols(c0, nc);
      out /= static_cast<double>(n_);
      out.noalias() -= pooled_vec_.segment(r0, nr) * pooled_vec_.segment(c0, nc).transpose();
      return;
    }
    for (Eigen::Index i = 0; i < nr; ++i) {
      const GridPair a = unflat(row0 + static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < nc; ++j) out(i, j) = gauss_entry(a, unflat(col0 + static_cast<std::size_t>(j)));
    }
  }

  /// Product rows vec(v_ij v_ij^T), one per subject (empirical variant only).
  const Matrix& product_rows() const { return products_; }
  /// vec of the pooled covariance.
  const Vector& pooled_vector() const { return pooled_vec_; }
  std::size_t sample_size() const { return n_; }

 private:
  FourthMomentSurface() = default;

  double gauss_entry(GridPair a, GridPair b) const {
    const auto s1 = static_cast<Eigen::Index>(a.s), t1 = static_cast<Eigen::Index>(a.t);
    const auto s2 = static_cast<Eigen::Index>(b.s), t2 = static_cast<Eigen::Index>(b.t);
    return pooled_(s1, s2) * pooled_(t1, t2) + pooled_(s1, t2) * pooled_(s2, t1);
  }

  VarpiVariant variant_ = VarpiVariant::empirical;
  std::size_t J_ = 0;
  std::size_t n_ = 0;
  Matrix products_;
  Matrix pooled_;
  Vector pooled_vec_;
  Vector diag_;
};

inline FourthMomentSurface varpi_empirical(const FunctionalDataset& data) {
  return FourthMomentSurface::empirical(data);
}

inline FourthMomentSurface varpi_gaussian(const CovSurface& pooled) {
  return FourthMomentSurface::gaussian(pooled);
}

/// Relative floor below which a fourth-moment diagonal entry is rejected.
inline constexpr double kDiagFloor = 1e-12;

/// Correlation-normalized fourth-moment surface, unit diagonal by construction.
class GammaOmega {
 public:
  explicit GammaOmega(FourthMomentSurface varpi) : varpi_(std::move(varpi)) {
    const Vector& d = varpi_.diag();
    const double floor = kDiagFloor * std::max(d.maxCoeff(), 0.0);
    std::vector<std::size_t> bad;
    for (Eigen::Index p = 0; p < d.size(); ++p) {
      if (!(d(p) > floor)) bad.push_back(static_cast<std::size_t>(p));
    }
    if (!bad.empty()) {
      std::ostringstream msg;
      msg << "fourth-moment diagonal is not positive at " << bad.size() << " grid pair(s):";
      for (std::size_t i = 0; i < bad.size() && i < 10; ++i) {
        const GridPair g = varpi_.unflat(bad[i]);
        msg << " (" << g.s << "," << g.t << ")";
      }
      if (bad.size() > 10) msg << " ...";
      throw DegenerateDataError(msg.str());
    }
    inv_sqrt_diag_ = d.cwiseSqrt().cwiseInverse();
  }

  const FourthMomentSurface& varpi() const { return varpi_; }
  std::size_t grid_size() const { return varpi_.grid_size(); }
  std::size_t num_pairs() const { return varpi_.num_pairs(); }
  const Vector& inv_sqrt_diag() const { return inv_sqrt_diag_; }

  double at(std::size_t p, std::size_t q) const {
    if (p == q) return 1.0;
    const auto ip = static_cast<Eigen::Index>(p);
    const auto iq = static_cast<Eigen::Index>(q);
    return varpi_.at(p, q) * inv_sqrt_diag_(ip) * inv_sqrt_diag_(iq);
  }

  double operator()(GridPair a, GridPair b) const { return at(varpi_.flat(a), varpi_.flat(b)); }

  void evaluate_block(std::size_t row0, std::size_t rows, std::size_t col0, std::size_t cols,
                      Matrix& out) const {
    varpi_.evaluate_block(row0, rows, col0, cols, out);
    const auto r0 = static_cast<Eigen::Index>(row0);
    const auto c0 = static_cast<Eigen::Index>(col0);
    out = inv_sqrt_diag_.segment(r0, out.rows()).asDiagonal() * out *
          inv_sqrt_diag_.segment(c0, out.cols()).asDiagonal();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const Eigen::Index j = r0 + i - c0;
      if (j >= 0 && j < out.cols()) out(i, j) = 1.0;
    }
  }

 private:
  FourthMomentSurface varpi_;
  Vector inv_sqrt_diag_;
};

/// Throws DegenerateDataError listing the offending grid pairs when any
/// diagonal entry is at or below kDiagFloor * max(diagonal).
inline GammaOmega gamma_omega(FourthMomentSurface varpi) { return GammaOmega(std::move(varpi)); }

struct Traces {
  double tr_gamma = 0.0;
  double tr_gamma_sq = 0.0;
};

/// Quadrature weight of flat pair p = (s, t): w_s * w_t.
inline Vector pair_weights(const Grid& grid) {
  const std::size_t J = grid.size();
  Vector w(static_cast<Eigen::Index>(J * J));
  for (std::size_t s = 0; s < J; ++s)
    for (std::size_t t = 0; t < J; ++t)
      w(static_cast<Eigen::Index>(s * J + t)) = grid.weight(s) * grid.weight(t);
  return w;
}

inline constexpr std::size_t kDefaultBlockColumns = 256;

/// tr(gamma_omega) = (b - a)^2 analytically, and the quadruple quadrature sum
/// of gamma_omega^2, evaluated over square blocks of the flattened table.
/// Only blocks on or above the block diagonal are evaluated; blocks are visited
/// in a fixed order so the sum is reproducible.
inline Traces traces(const GammaOmega& gomega, const Grid& grid,
                     std::size_t block_columns = kDefaultBlockColumns) {
  if (gomega.grid_size() != grid.size()) throw ValidationError("gamma_omega does not match the grid");
  if (block_columns == 0) throw ValidationError("block size must be positive");
  const Vector w = pair_weights(grid);
  const std::size_t P = gomega.num_pairs();
  Matrix block;
  double total = 0.0;
  for (std::size_t r0 = 0; r0 < P; r0 += block_columns) {
    const std::size_t nr = std::min(block_columns, P - r0);
    for (std::size_t c0 = r0; c0 < P; c0 += block_columns) {
      const std::size_t nc = std::min(block_columns, P - c0);
      gomega.evaluate_block(r0, nr, c0, nc, block);
      const auto wr = w.segment(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(nr));
      const auto wc = w.segment(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(nc));
      const double part = wr.dot(block.cwiseAbs2() * wc);
      total += (c0 == r0) ? part : 2.0 * part;
    }
  }
  return Traces{grid.length() * grid.length(), total};
}

/// Same quantity as traces() for the empirical variant, through the n x n Gram
/// matrix of weighted product rows:
///   sum_pq (a_p a_q varpi_pq)^2 = |X X^T|^2 / n^2 - 2 |X h|^2 / n + |h|^4,
/// with X = product rows scaled by a_p = sqrt(m_p w_p / varpi_pp) over the
/// unique pairs s <= t (multiplicity m_p) and h = a o vec(gamma).
/// Cost is O(n^2 J^2) instead of O(n J^4).
inline Traces traces_gram(const GammaOmega& gomega, const Grid& grid) {
  const FourthMomentSurface& varpi = gomega.varpi();
  if (varpi.variant() != VarpiVariant::empirical)
    throw ValidationError("traces_gram requires the empirical fourth-moment estimator");
  if (gomega.grid_size() != grid.size()) throw ValidationError("gamma_omega does not match the grid");
  const std::size_t J = grid.size();
  const std::size_t U = J * (J + 1) / 2;
  const Matrix& products = varpi.product_rows();
  const Vector& g = varpi.pooled_vector();
  const Vector& isd = gomega.inv_sqrt_diag();
  const auto n = products.rows();
  Matrix x(n, static_cast<Eigen::Index>(U));
  Vector h(static_cast<Eigen::Index>(U));
  Eigen::Index u = 0;
  for (std::size_t s = 0; s < J; ++s) {
    for (std::size_t t = s; t < J; ++t, ++u) {
      const auto p = static_cast<Eigen::Index>(s * J + t);
      const double mult = (s == t) ? 1.0 : 2.0;
      const double a = std::sqrt(mult * grid.weight(s) * grid.weight(t)) * isd(p);
      x.col(u) = products.col(p) * a;
      h(u) = g(p) * a;
    }
  }
  Matrix gram(n, n);
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  const Matrix full = gram.selfadjointView<Eigen::Lower>();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Vector xh = x * h;
  const double hh = h.squaredNorm();
  const double total = full.squaredNorm() * inv_n * inv_n - 2.0 * inv_n * xh.squaredNorm() + hh * hh;
  return Traces{grid.length() * grid.length(), total};
}

}  // namespace qfcov
