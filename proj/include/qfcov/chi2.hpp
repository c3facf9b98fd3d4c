#pragma once

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "qfcov/errors.hpp"

namespace qfcov {

/// Upper tail P(chi2_df > x) for real df > 0, through the regularized
/// incomplete gamma function Q(df / 2, x / 2).
inline double chi2_sf(double x, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw ValidationError("chi2_sf: df must be positive");
  if (!(x >= 0.0)) throw ValidationError("chi2_sf: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Upper-alpha quantile: the x with chi2_sf(x, df) = alpha.
inline double chi2_upper_quantile(double alpha, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw ValidationError("chi2 quantile: df must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("chi2 quantile: alpha must lie in (0, 1)");
  return 2.0 * boost::math::gamma_q_inv(0.5 * df, alpha);
}

}  // namespace qfcov
