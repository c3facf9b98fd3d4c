#pragma once

#include <cstddef>

#include "qfcov/chi2.hpp"
#include "qfcov/fourth_moment.hpp"
#include "qfcov/report.hpp"
#include "qfcov/surfaces.hpp"

namespace qfcov {

/// Two-moment match of the chi-square-type mixture to beta * chi2_d.
/// beta * d equals tr_gamma identically.
inline WsParams ws_params(const Traces& tr, std::size_t k) {
  if (k < 2) throw ValidationError("ws_params needs k >= 2");
  if (!(tr.tr_gamma_sq > 0.0)) throw ValidationError("tr(gamma_omega^2) must be positive");
  if (!(tr.tr_gamma > 0.0)) throw ValidationError("tr(gamma_omega) must be positive");
  const double km1 = static_cast<double>(k - 1);
  WsParams p;
  p.tr_gamma = tr.tr_gamma;
  p.tr_gamma_sq = tr.tr_gamma_sq;
  p.beta = tr.tr_gamma_sq / (km1 * tr.tr_gamma);
  p.d = km1 * tr.tr_gamma * tr.tr_gamma / tr.tr_gamma_sq;
  return p;
}

struct GpfOptions {
  VarpiVariant varpi = VarpiVariant::empirical;
  double eps = kDefaultSseFloor;
  /// Force the generic blockwise trace even when the Gram shortcut applies.
  bool blockwise = false;
  std::size_t block_columns = kDefaultBlockColumns;
};

/// Traces for the chosen fourth-moment variant.
inline Traces gpf_traces(const FunctionalDataset& data, const GpfOptions& opt = {}) {
  FourthMomentSurface varpi = opt.varpi == VarpiVariant::empirical
                                  ? varpi_empirical(data)
                                  : varpi_gaussian(pooled_cov(data));
  const GammaOmega gw = gamma_omega(std::move(varpi));
  if (opt.varpi == VarpiVariant::empirical && !opt.blockwise) return traces_gram(gw, data.grid());
  return traces(gw, data.grid(), opt.block_columns);
}

/// Quasi GPF test calibrated by the scaled chi-square approximation.
inline TestReport gpf_nv(const FunctionalDataset& data, double alpha, const GpfOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const FSurface f = quasi_f_surface(data, opt.eps);
  const GlobalStats g = globalize(f, data.grid());
  const WsParams ws = ws_params(gpf_traces(data, opt), data.num_groups());

  TestReport r;
  r.test = TestKind::gpf_nv;
  r.statistic = g.t_n;
  r.alpha = alpha;
  r.p_value = chi2_sf(g.t_n / ws.beta, ws.d);
  r.critical_value = ws.beta * chi2_upper_quantile(alpha, ws.d);
  r.reject = r.p_value < alpha;
  r.eps_hits = f.eps_hits;
  r.ws = ws;
  r.varpi = opt.varpi;
  return r;
}

}  // namespace qfcov
