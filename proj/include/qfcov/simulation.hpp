#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "qfcov/dataset.hpp"
#include "qfcov/parallel.hpp"
#include "qfcov/permutation.hpp"
#include "qfcov/report.hpp"
#include "qfcov/rng.hpp"
#include "qfcov/ws.hpp"

namespace qfcov {

/// m31: v_ij(t) = b_ij' Psi_i(t). m32: the same divided by (t + 1/J), with the
/// second basis function of group 2 shifted by t * omega instead of a constant.
enum class Model { m31, m32 };
enum class ScoreDist { gaussian, t4_scaled };

/// How omega enters the second basis function.
///   shift_by_group: psi_i2 = phi_2 + i * omega for zero-based group i.
///   linear_group2:  psi_12 = phi_2 + t * omega (zero-based group 1 only).
enum class BasisRule { shift_by_group, linear_group2 };

inline const char* to_string(Model m) { return m == Model::m31 ? "m31" : "m32"; }
inline const char* to_string(ScoreDist d) { return d == ScoreDist::gaussian ? "gaussian" : "t4"; }

inline Model parse_model(std::string_view s) {
  if (s == "m31") return Model::m31;
  if (s == "m32") return Model::m32;
  throw ValidationError("unknown model '" + std::string(s) + "' (expected m31 or m32)");
}

inline ScoreDist parse_score_dist(std::string_view s) {
  if (s == "gaussian") return ScoreDist::gaussian;
  if (s == "t4" || s == "t4_scaled") return ScoreDist::t4_scaled;
  throw ValidationError("unknown score distribution '" + std::string(s) + "' (expected gaussian or t4)");
}

struct SimConfig {
  Model model = Model::m31;
  std::array<double, 4> c1 = {1.0, 2.3, 3.4, 1.5};
  double delta = 0.1;
  std::array<double, 4> u = {1.0 / std::sqrt(30.0), 2.0 / std::sqrt(30.0), 3.0 / std::sqrt(30.0),
                             4.0 / std::sqrt(30.0)};
  double a_var = 1.5;
  double rho = 0.5;
  std::size_t q = 11;
  double omega = 0.0;
  std::size_t J = 80;
  std::vector<std::size_t> sizes = {30, 40, 50};
  ScoreDist scores = ScoreDist::gaussian;

  std::size_t k() const { return sizes.size(); }
  BasisRule basis_rule() const {
    return model == Model::m31 ? BasisRule::shift_by_group : BasisRule::linear_group2;
  }

  void validate() const {
    if (q == 0 || q % 2 == 0) throw ValidationError("q must be an odd positive integer");
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("rho must lie in (0, 1)");
    if (!(a_var > 0.0)) throw ValidationError("a must be positive");
    if (J < 2) throw ValidationError("J must be at least 2");
    if (sizes.size() < 2) throw ValidationError("need at least 2 group sizes");
    for (std::size_t n : sizes)
      if (n < 2) throw ValidationError("every group needs at least 2 curves");
    double norm2 = 0.0;
    for (double x : u) norm2 += x * x;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-12) throw ValidationError("u must be a unit vector");
  }
};

/// Variance components lambda_r = a rho^(r-1), r = 1..q.
inline Vector variance_components(const SimConfig& cfg) {
  Vector lambda(static_cast<Eigen::Index>(cfg.q));
  for (std::size_t r = 0; r < cfg.q; ++r)
    lambda(static_cast<Eigen::Index>(r)) = cfg.a_var * std::pow(cfg.rho, static_cast<double>(r));
  return lambda;
}

/// Orthonormal Fourier basis on [0, 1]: 1, sqrt2 sin(2 pi r t), sqrt2 cos(2 pi r t), ...
/// `index` is one-based, matching phi_1 = 1.
inline double fourier_phi(std::size_t index, double t) {
  if (index == 1) return 1.0;
  const double r = static_cast<double>(index / 2);
  const double arg = 2.0 * std::numbers::pi * r * t;
  return std::numbers::sqrt2 * (index % 2 == 0 ? std::sin(arg) : std::cos(arg));
}

/// psi_{i,1..q}(t) for zero-based group `group`.
inline Vector basis_eval(std::size_t q, BasisRule rule, std::size_t group, double omega, double t) {
  Vector psi(static_cast<Eigen::Index>(q));
  for (std::size_t r = 1; r <= q; ++r) psi(static_cast<Eigen::Index>(r - 1)) = fourier_phi(r, t);
  if (q >= 2) {
    if (rule == BasisRule::shift_by_group)
      psi(1) += static_cast<double>(group) * omega;
    else if (group == 1)
      psi(1) += t * omega;
  }
  return psi;
}

/// Design points t_j = (j - 1) / (J - 1) on [0, 1].
inline Grid sim_grid(std::size_t J) { return Grid::uniform(0.0, 1.0, J); }

/// Factor applied to the subject effects at t: 1 for m31, 1 / (t + 1/J) for m32.
inline double effect_scale(const SimConfig& cfg, double t) {
  return cfg.model == Model::m31 ? 1.0 : 1.0 / (t + 1.0 / static_cast<double>(cfg.J));
}

/// J x q matrix with rows scale(t_j) * sqrt(lambda_r) * psi_ir(t_j).
inline Matrix loading_matrix(const SimConfig& cfg, std::size_t group) {
  const Grid grid = sim_grid(cfg.J);
  const Vector sqrt_lambda = variance_components(cfg).cwiseSqrt();
  Matrix load(static_cast<Eigen::Index>(cfg.J), static_cast<Eigen::Index>(cfg.q));
  for (std::size_t j = 0; j < cfg.J; ++j) {
    const double t = grid.point(j);
    const Vector psi = basis_eval(cfg.q, cfg.basis_rule(), group, cfg.omega, t);
    load.row(static_cast<Eigen::Index>(j)) = (psi.cwiseProduct(sqrt_lambda) * effect_scale(cfg, t)).transpose();
  }
  return load;
}

/// Closed-form covariance of zero-based group `group` on the simulation grid.
inline CovSurface true_cov(const SimConfig& cfg, std::size_t group) {
  cfg.validate();
  if (group >= cfg.k()) throw ValidationError("group index out of range");
  const Matrix load = loading_matrix(cfg, group);
  Matrix cov = load * load.transpose();
  Matrix sym = cov.selfadjointView<Eigen::Lower>();
  return CovSurface{std::move(sym)};
}

/// Mean function eta_i(t) = c_i' [1, t, t^2, t^3] with c_i = c_1 + i * delta * u.
inline Curve true_mean(const SimConfig& cfg, std::size_t group) {
  const Grid grid = sim_grid(cfg.J);
  std::array<double, 4> c{};
  for (std::size_t m = 0; m < 4; ++m) c[m] = cfg.c1[m] + static_cast<double>(group) * cfg.delta * cfg.u[m];
  Vector eta(static_cast<Eigen::Index>(cfg.J));
  for (std::size_t j = 0; j < cfg.J; ++j) {
    const double t = grid.point(j);
    eta(static_cast<Eigen::Index>(j)) = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
  }
  return Curve{std::move(eta)};
}

/// Score draws with mean 0 and variance 1.
class ScoreSampler {
 public:
  ScoreSampler(ScoreDist dist, std::uint64_t seed) : dist_(dist), rng_(seed) {}

  double operator()() {
    const double z = normal_(rng_);
    if (dist_ == ScoreDist::gaussian) return z;
    // t_4 = Z / sqrt(chi2_4 / 4); Var(t_4) = 2, hence the 1/sqrt(2).
    double chi2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double x = normal_(rng_);
      chi2 += x * x;
    }
    return z / std::sqrt(chi2 / 4.0) / std::numbers::sqrt2;
  }

 private:
  ScoreDist dist_;
  Xoshiro256 rng_;
  boost::random::normal_distribution<double> normal_;
};

/// One simulated dataset; deterministic given (cfg, seed). Groups are labelled g1..gk.
inline FunctionalDataset gen_dataset(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ScoreSampler sampler(cfg.scores, seed);
  std::vector<FunctionalGroup> groups;
  groups.reserve(cfg.k());
  for (std::size_t i = 0; i < cfg.k(); ++i) {
    const Matrix load = loading_matrix(cfg, i);
    const Vector eta = true_mean(cfg, i).values;
    const auto ni = static_cast<Eigen::Index>(cfg.sizes[i]);
    Matrix z(ni, static_cast<Eigen::Index>(cfg.q));
    for (Eigen::Index j = 0; j < ni; ++j)
      for (Eigen::Index r = 0; r < z.cols(); ++r) z(j, r) = sampler();
    Matrix y = z * load.transpose();
    y.rowwise() += eta.transpose();
    groups.emplace_back("g" + std::to_string(i + 1), std::move(y));
  }
  return FunctionalDataset(sim_grid(cfg.J), std::move(groups));
}

struct StudyOptions {
  std::size_t reps = 2000;
  std::size_t B = kDefaultPermutations;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::size_t workers = default_workers();
  VarpiVariant varpi = VarpiVariant::empirical;
  double eps = kDefaultSseFloor;
};

/// Rejection percentages for one configuration, in kAllTests order
/// (L2_rp, Tmax_rp, GPF_nv, GPF_rp, Fmax_rp).
struct PowerRow {
  SimConfig config;
  std::size_t reps = 0;
  std::size_t used = 0;
  std::size_t degenerate = 0;
  std::size_t B = 0;
  double alpha = 0.05;
  std::array<double, 5> reject_pct{};
  std::array<double, 5> mc_se{};

  double pct(TestKind t) const {
    for (std::size_t i = 0; i < kAllTests.size(); ++i)
      if (kAllTests[i] == t) return reject_pct[i];
    return 0.0;
  }
  double se(TestKind t) const {
    for (std::size_t i = 0; i < kAllTests.size(); ++i)
      if (kAllTests[i] == t) return mc_se[i];
    return 0.0;
  }
};

/// Binomial standard error of a rejection percentage over `reps` replications.
inline double binomial_se_pct(double pct, std::size_t reps) {
  if (reps == 0) return 0.0;
  const double p = pct / 100.0;
  return 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
}

/// Rejection decisions of the five tests on one dataset, in kAllTests order.
inline std::array<bool, 5> run_all_tests(const FunctionalDataset& data, std::size_t B, std::uint64_t perm_seed,
                                         double alpha, VarpiVariant varpi, double eps) {
  std::array<bool, 5> out{};
  GpfOptions gopt;
  gopt.varpi = varpi;
  gopt.eps = eps;
  const TestReport nv = gpf_nv(data, alpha, gopt);
  const std::array<PermStatistic, 4> stats{PermStatistic::l2, PermStatistic::tmax, PermStatistic::gpf,
                                           PermStatistic::fmax};
  const auto rp = perm_tests(data, stats, B, perm_seed, alpha, PermOptions{eps, 1});
  out[0] = rp[0].report.reject;
  out[1] = rp[1].report.reject;
  out[2] = nv.reject;
  out[3] = rp[2].report.reject;
  out[4] = rp[3].report.reject;
  return out;
}

/// Size/power estimate for one configuration. Replicate r uses dataset seed
/// derive_seed(config_seed, {r, 0}) and permutation seed derive_seed(config_seed, {r, 1}),
/// so the row is identical for any worker count.
inline PowerRow run_power_config(const SimConfig& cfg, const StudyOptions& opt, std::uint64_t config_seed) {
  cfg.validate();
  if (opt.reps < 1) throw ValidationError("reps must be at least 1");
  struct Outcome {
    bool degenerate = false;
    std::array<bool, 5> reject{};
  };
  std::vector<Outcome> outcomes(opt.reps);
  parallel_for(opt.reps, opt.workers, [&](std::size_t r) {
    const FunctionalDataset data = gen_dataset(cfg, derive_seed(config_seed, {r, 0}));
    try {
      outcomes[r].reject = run_all_tests(data, opt.B, derive_seed(config_seed, {r, 1}), opt.alpha, opt.varpi, opt.eps);
    } catch (const DegenerateDataError&) {
      outcomes[r].degenerate = true;
    }
  });
  PowerRow row;
  row.config = cfg;
  row.reps = opt.reps;
  row.B = opt.B;
  row.alpha = opt.alpha;
  std::array<std::size_t, 5> counts{};
  for (const auto& o : outcomes) {
    if (o.degenerate) {
      ++row.degenerate;
      continue;
    }
    ++row.used;
    for (std::size_t i = 0; i < 5; ++i) counts[i] += o.reject[i] ? 1 : 0;
  }
  for (std::size_t i = 0; i < 5; ++i) {
    row.reject_pct[i] = row.used ? 100.0 * static_cast<double>(counts[i]) / static_cast<double>(row.used) : 0.0;
    row.mc_se[i] = binomial_se_pct(row.reject_pct[i], row.used);
  }
  return row;
}

/// Runs each configuration with seed derive_seed(opt.seed, {index}); `on_row`
/// is called as each row completes.
inline std::vector<PowerRow> run_power_study(std::span<const SimConfig> configs, const StudyOptions& opt,
                                             const std::function<void(std::size_t, const PowerRow&)>& on_row = {}) {
  std::vector<PowerRow> rows;
  rows.reserve(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    rows.push_back(run_power_config(configs[c], opt, derive_seed(opt.seed, {c})));
    if (on_row) on_row(c, rows.back());
  }
  return rows;
}

/// Observed statistics of `reps` independent datasets drawn from cfg; with
/// omega = 0 this is a Monte Carlo sample of the true null distribution.
inline std::vector<ObservedStatistics> simulated_statistics(const SimConfig& cfg, std::size_t reps,
                                                            std::uint64_t seed, std::size_t workers = 1,
                                                            double eps = kDefaultSseFloor) {
  std::vector<ObservedStatistics> out(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    out[r] = observed_statistics(gen_dataset(cfg, derive_seed(seed, {r})), true, eps);
  });
  return out;
}

}  // namespace qfcov
