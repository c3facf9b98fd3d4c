#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace qfcov;
using qfcov::testing::rel_err;

TEST(Basis, FourierValues) {
  EXPECT_EQ(fourier_phi(1, 0.25), 1.0);
  EXPECT_NEAR(fourier_phi(2, 0.25), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(fourier_phi(3, 0.25), 0.0, 1e-15);
  EXPECT_NEAR(fourier_phi(5, 0.0), std::sqrt(2.0), 1e-15);
}

TEST(Basis, ZeroOmegaIsPlainFourier) {
  for (auto rule : {BasisRule::shift_by_group, BasisRule::linear_group2})
    for (std::size_t g = 0; g < 3; ++g)
      for (double t : {0.0, 0.3, 1.0}) {
        const Vector psi = basis_eval(11, rule, g, 0.0, t);
        for (std::size_t r = 1; r <= 11; ++r) EXPECT_EQ(psi(static_cast<Eigen::Index>(r - 1)), fourier_phi(r, t));
      }
}

TEST(Basis, ShiftRules) {
  EXPECT_NEAR(basis_eval(5, BasisRule::shift_by_group, 2, 0.7, 0.1)(1), fourier_phi(2, 0.1) + 1.4, 1e-15);
  EXPECT_NEAR(basis_eval(5, BasisRule::linear_group2, 1, 7.0, 0.5)(1), fourier_phi(2, 0.5) + 3.5, 1e-15);
  EXPECT_EQ(basis_eval(5, BasisRule::linear_group2, 0, 7.0, 0.5)(1), fourier_phi(2, 0.5));
  EXPECT_EQ(basis_eval(5, BasisRule::linear_group2, 2, 7.0, 0.5)(1), fourier_phi(2, 0.5));
}

TEST(Basis, Orthonormal) {
  const Grid g = Grid::uniform(0.0, 1.0, 4001);
  for (std::size_t r = 1; r <= 11; ++r)
    for (std::size_t s = 1; s <= 11; ++s) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) acc += g.weight(j) * fourier_phi(r, g.point(j)) * fourier_phi(s, g.point(j));
      EXPECT_NEAR(acc, r == s ? 1.0 : 0.0, 1e-6) << r << "," << s;
    }
}

TEST(TrueCov, GeometricSumAtOrigin) {
  SimConfig cfg;
  cfg.rho = 0.1;
  EXPECT_NEAR(true_cov(cfg, 0)(0, 0), 1.5303030303, 1e-10);
}

TEST(TrueCov, NullConfigsCoincide) {
  SimConfig cfg;
  cfg.J = 15;
  cfg.delta = 3.0;
  const Matrix g0 = true_cov(cfg, 0).values;
  EXPECT_EQ(true_cov(cfg, 1).values, g0);
  EXPECT_EQ(true_cov(cfg, 2).values, g0);
}

TEST(TrueCov, GroupDifferenceIdentity) {
  SimConfig cfg;
  cfg.J = 21;
  cfg.omega = 0.8;
  cfg.rho = 0.3;
  const Grid grid = sim_grid(cfg.J);
  const double lambda2 = cfg.a_var * cfg.rho;
  const Matrix diff = true_cov(cfg, 1).values - true_cov(cfg, 0).values;
  for (std::size_t s = 0; s < cfg.J; ++s)
    for (std::size_t t = 0; t < cfg.J; ++t) {
      const double want = lambda2 * (fourier_phi(2, grid.point(s)) + fourier_phi(2, grid.point(t))) * cfg.omega +
                          lambda2 * cfg.omega * cfg.omega;
      EXPECT_NEAR(diff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)), want, 1e-12);
    }
}

TEST(TrueCov, Model32ScalesEffects) {
  SimConfig a;
  a.J = 12;
  a.omega = 7.0;
  a.rho = 0.1;
  SimConfig b = a;
  b.model = Model::m32;
  const Grid grid = sim_grid(a.J);
  const Matrix base = true_cov(a, 0).values;
  const Matrix scaled = true_cov(b, 0).values;
  for (std::size_t s = 0; s < a.J; ++s)
    for (std::size_t t = 0; t < a.J; ++t) {
      const double f = (grid.point(s) + 1.0 / 12.0) * (grid.point(t) + 1.0 / 12.0);
      EXPECT_NEAR(scaled(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) * f,
                  base(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)), 1e-10);
    }
  EXPECT_EQ(true_cov(b, 2).values, true_cov(b, 0).values);
  EXPECT_GT((true_cov(b, 1).values - true_cov(b, 0).values).cwiseAbs().maxCoeff(), 1.0);
}

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.q = 10;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.q = 11;
  cfg.rho = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.rho = 0.5;
  cfg.u = {1.0, 0.0, 0.0, 0.1};
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(parse_model("m33"), ValidationError);
  EXPECT_EQ(parse_score_dist("t4"), ScoreDist::t4_scaled);
}

TEST(GenDataset, DeterministicAndShaped) {
  SimConfig cfg;
  cfg.J = 10;
  cfg.sizes = {3, 4, 5};
  const auto a = gen_dataset(cfg, 9), b = gen_dataset(cfg, 9), c = gen_dataset(cfg, 10);
  EXPECT_EQ(a.group_sizes(), (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(a.grid_size(), 10u);
  EXPECT_DOUBLE_EQ(a.grid().point(9), 1.0);
  EXPECT_EQ(a.groups()[2].label(), "g3");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.groups()[i].curves(), b.groups()[i].curves());
    EXPECT_NE(a.groups()[i].curves(), c.groups()[i].curves());
  }
}

TEST(GenDataset, T4ScoresHaveUnitVariance) {
  ScoreSampler s(ScoreDist::t4_scaled, 3);
  const int m = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = s();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / m;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / m - mean * mean, 1.0, 0.05);
}

TEST(GenDataset, LargeSampleMatchesTruth) {
  SimConfig cfg;
  cfg.sizes = {2000, 2000};
  cfg.delta = 0.5;
  const auto data = gen_dataset(cfg, 77);
  for (std::size_t i = 0; i < 2; ++i) {
    const Matrix truth = true_cov(cfg, i).values;
    // Gaussian sampling sd of a covariance entry: sqrt((g_ss g_tt + g_st^2) / n).
    const Vector d = truth.diagonal();
    const Matrix sd = ((d * d.transpose() + truth.cwiseAbs2()) / 2000.0).cwiseSqrt();
    const Matrix err = (group_cov(data.groups()[i]).values - truth).cwiseAbs();
    EXPECT_LT(err.cwiseQuotient(sd).maxCoeff(), 5.0);
    EXPECT_LT(err.maxCoeff(), 0.4);
    const Vector eta = true_mean(cfg, i).values;
    const Vector se = (truth.diagonal() / 2000.0).cwiseSqrt();
    const Vector mean_err = group_mean(data.groups()[i]).values - eta;
    EXPECT_LT(mean_err.cwiseAbs().maxCoeff(), 3.0 * se.maxCoeff());
  }
}

TEST(GenDataset, ZeroDeltaMeansAgree) {
  SimConfig cfg;
  cfg.J = 6;
  cfg.delta = 0.0;
  cfg.sizes = {50, 50};
  Vector acc = Vector::Zero(6);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto d = gen_dataset(cfg, derive_seed(4, {r}));
    acc += group_mean(d.groups()[1]).values - group_mean(d.groups()[0]).values;
  }
  acc /= 200.0;
  // SE of each averaged difference is at most sqrt(2 * 1.5 * 2 / 50 / 200) ~ 0.025.
  EXPECT_LT(acc.cwiseAbs().maxCoeff(), 0.1);
}

TEST(PowerStudy, BinomialSe) {
  EXPECT_NEAR(binomial_se_pct(5.0, 2000), 0.4873397172, 1e-9);
  EXPECT_NEAR(binomial_se_pct(5.0, 4000) * std::sqrt(2.0), binomial_se_pct(5.0, 2000), 1e-12);
  EXPECT_EQ(binomial_se_pct(5.0, 0), 0.0);
}

TEST(PowerStudy, DeterministicAcrossWorkers) {
  SimConfig cfg;
  cfg.J = 8;
  cfg.sizes = {6, 7, 8};
  cfg.omega = 0.5;
  StudyOptions opt;
  opt.reps = 24;
  opt.B = 19;
  opt.workers = 1;
  const auto one = run_power_config(cfg, opt, 11);
  opt.workers = 4;
  const auto four = run_power_config(cfg, opt, 11);
  EXPECT_EQ(one.reject_pct, four.reject_pct);
  EXPECT_EQ(one.used + one.degenerate, 24u);
  for (double p : one.reject_pct) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 100.0);
  }
  const std::vector<SimConfig> configs{cfg, cfg};
  std::size_t seen = 0;
  const auto rows = run_power_study(configs, opt, [&](std::size_t, const PowerRow&) { ++seen; });
  EXPECT_EQ(seen, 2u);
  EXPECT_EQ(rows[0].reject_pct, run_power_config(cfg, opt, derive_seed(opt.seed, {0})).reject_pct);
}
