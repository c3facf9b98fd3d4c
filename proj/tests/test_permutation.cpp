#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>


#include "test_util.hpp"

using namespace qfcov;
using qfcov::testing::make_dataset;
using qfcov::testing::random_dataset;
using qfcov::testing::rel_err;

namespace {

std::vector<std::uint32_t> identity_table(std::size_t n) {
  std::vector<std::uint32_t> t(n);
  std::iota(t.begin(), t.end(), 0u);
  return t;
}

double chi2_gof_p(const std::vector<std::size_t>& counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (std::size_t c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return chi2_sf(stat, static_cast<double>(counts.size() - 1));
}

}  // namespace

TEST(Plan, DeterministicBijections) {
  const PermutationPlan a = make_plan(42, 50, {4, 5, 6});
  const PermutationPlan b = make_plan(42, 50, {4, 5, 6});
  EXPECT_EQ(a.index_tables, b.index_tables);
  EXPECT_NE(a.index_tables, make_plan(43, 50, {4, 5, 6}).index_tables);
  for (auto t : a.index_tables) {
    std::sort(t.begin(), t.end());
    EXPECT_EQ(t, identity_table(15));
  }
  EXPECT_THROW(make_plan(1, 0, {3, 3}), ValidationError);
  EXPECT_THROW(make_plan(1, 5, {3}), ValidationError);
}

TEST(Plan, GoldenFirstTable) {
  // Independent Python reimplementation of xoshiro256** + Fisher-Yates.
  const std::vector<std::uint32_t> want{5, 1, 13, 4, 6, 7, 2, 9, 0, 8, 12, 11, 14, 3, 10};
  EXPECT_EQ(make_plan(7, 5, {4, 5, 6}).index_tables.front(), want);
}

TEST(Plan, PositionOfFirstElementIsUniform) {
  const PermutationPlan plan = make_plan(2024, 100000, {4, 6});
  std::vector<std::size_t> counts(10, 0);
  for (const auto& t : plan.index_tables) counts[static_cast<std::size_t>(std::find(t.begin(), t.end(), 0u) - t.begin())]++;
  EXPECT_GT(chi2_gof_p(counts), 0.001);
}

TEST(PermutedStatistics, GoldenNullSample) {
  // Values from the numpy oracle for plan(seed 7, B 5) on the fixture.
  const double want[5][4] = {
      {1.2639923154205168, 2.9130646303150534, 8.117814484844402, 107.38529581491832},
      {1.0741137601178106, 3.4158829378216975, 7.546054978907374, 33.67176285947748},
      {1.9615971912633823, 4.78492147330192, 9.148910272990204, 23.064455716310647},
      {1.7853258767981184, 4.200138567541873, 9.887961942058999, 83.55104042439953},
      {1.2513935362281285, 2.888809766354476, 7.894374700904628, 41.60179895784687}};
  const auto data = load_dataset(qfcov::testing::data_path("small.csv"));
  const auto plan = make_plan(7, 5, data.group_sizes());
  const auto reps = evaluate_plan(effects_pool(data), plan, data.grid());
  for (std::size_t b = 0; b < 5; ++b) {
    EXPECT_LT(rel_err(reps[b].t_star, want[b][0]), 1e-10) << b;
    EXPECT_LT(rel_err(reps[b].f_star, want[b][1]), 1e-10) << b;
    EXPECT_LT(rel_err(reps[b].l2_star, want[b][2]), 1e-10) << b;
    EXPECT_LT(rel_err(reps[b].tmax_star, want[b][3]), 1e-10) << b;
  }
  const auto res = perm_test(data, PermStatistic::gpf, 5, 7, 0.05);
  ASSERT_EQ(res.null.values.size(), 5u);
  EXPECT_LT(rel_err(res.null.values[2], want[2][0]), 1e-10);
  // Observed T_n = 1.5249 beats 3 of the 5 permuted values.
  EXPECT_DOUBLE_EQ(res.report.p_value, 3.0 / 6.0);
}

TEST(PermutedStatistics, IdentityFixpoint) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = random_dataset(seed, {7, 5, 9}, 8, 0.0, 3.0);
    const ObservedStatistics obs = observed_statistics(data, true);
    const PermutedStatistics id =
        permuted_statistics(effects_pool(data), identity_table(21), data.group_sizes(), data.grid());
    EXPECT_LT(rel_err(id.t_star, obs.quasi_f->t_n), 1e-10);
    EXPECT_LT(rel_err(id.f_star, obs.quasi_f->f_max), 1e-10);
    EXPECT_LT(rel_err(id.l2_star, obs.l2), 1e-10);
    EXPECT_LT(rel_err(id.tmax_star, obs.tmax), 1e-10);
  }
}

TEST(PermutedStatistics, ZeroPoolIsDegenerate) {
  const Grid grid = Grid::uniform(0.0, 1.0, 4);
  const PermutedStatistics p = permuted_statistics(Matrix::Zero(6, 4), identity_table(6), {3, 3}, grid);
  EXPECT_TRUE(p.sse_degenerate);
  EXPECT_TRUE(std::isnan(p.t_star));
  EXPECT_TRUE(std::isnan(p.f_star));
  EXPECT_EQ(p.l2_star, 0.0);
  EXPECT_EQ(p.tmax_star, 0.0);
}

TEST(PermutedStatistics, SwappingEqualSizedGroups) {
  const auto data = random_dataset(9, {6, 6, 6}, 5);
  const Matrix pool = effects_pool(data);
  const auto plan = make_plan(3, 4, data.group_sizes());
  for (const auto& t : plan.index_tables) {
    std::vector<std::uint32_t> swapped(t);
    std::swap_ranges(swapped.begin(), swapped.begin() + 6, swapped.begin() + 12);
    const auto a = permuted_statistics(pool, t, data.group_sizes(), data.grid());
    const auto b = permuted_statistics(pool, swapped, data.group_sizes(), data.grid());
    EXPECT_LT(rel_err(a.t_star, b.t_star), 1e-12);
    EXPECT_LT(rel_err(a.f_star, b.f_star), 1e-12);
    EXPECT_LT(rel_err(a.l2_star, b.l2_star), 1e-12);
    EXPECT_LT(rel_err(a.tmax_star, b.tmax_star), 1e-12);
  }
}

TEST(PermutedStatistics, IntegralBoundedBySupremum) {
  const auto data = random_dataset(12, {5, 8, 6}, 7, 1.0, 2.5);
  const auto plan = make_plan(5, 200, data.group_sizes());
  const double len = data.grid().length();
  for (const auto& r : evaluate_plan(effects_pool(data), plan, data.grid()))
    EXPECT_LE(r.t_star, len * len * r.f_star + 1e-12);
}

TEST(PermutedStatistics, WorkerCountDoesNotChangeResults) {
  const auto data = random_dataset(13, {9, 8, 10}, 9);
  const std::array<PermStatistic, 4> all{PermStatistic::gpf, PermStatistic::fmax, PermStatistic::l2, PermStatistic::tmax};
  const auto one = perm_tests(data, all, 97, 5, 0.05, PermOptions{kDefaultSseFloor, 1});
  for (std::size_t workers : {2u, 3u, 8u}) {
    const auto many = perm_tests(data, all, 97, 5, 0.05, PermOptions{kDefaultSseFloor, workers});
    for (std::size_t s = 0; s < 4; ++s) {
      EXPECT_EQ(one[s].null.values, many[s].null.values);
      EXPECT_EQ(one[s].report, many[s].report);
    }
  }
}

TEST(PermTest, PValueConventions) {
  const std::vector<double> null{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(perm_p_value(0.0, null), 1.0);
  EXPECT_DOUBLE_EQ(perm_p_value(2.5, null), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(perm_p_value(3.0, null), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(perm_p_value(9.0, null), 1.0 / 5.0);
  double prev = 1.0;
  for (double x = -1.0; x < 6.0; x += 0.25) {
    const double p = perm_p_value(x, null);
    EXPECT_LE(p, prev);
    EXPECT_GE(p, 1.0 / 5.0);
    prev = p;
  }
}

TEST(PermTest, CriticalValueConvention) {
  std::vector<double> null(199);
  for (std::size_t i = 0; i < null.size(); ++i) null[i] = static_cast<double>(199 - i);  // 1..199 reversed
  EXPECT_EQ(perm_critical_value(null, 0.05), 190.0);   // ceil(0.95 * 200) = 190
  std::vector<double> two{5.0, 1.0};
  EXPECT_EQ(perm_critical_value(two, 0.05), 5.0);      // clamped to B
  EXPECT_EQ(perm_critical_value(two, 0.9), 1.0);
  std::vector<double> big(999);
  std::iota(big.begin(), big.end(), 1.0);
  EXPECT_EQ(perm_critical_value(big, 0.059), 941.0);   // (1 - 0.059) * 1000 rounds up in doubles
}

TEST(PermTest, IdenticalGroupsNeverReject) {
  const Matrix a = random_dataset(3, {10, 2}, 5).groups()[0].curves();
  const auto data = make_dataset({a, a});
  const std::array<PermStatistic, 4> all{PermStatistic::gpf, PermStatistic::fmax, PermStatistic::l2, PermStatistic::tmax};
  for (const auto& r : perm_tests(data, all, 99, 8, 0.05)) {
    EXPECT_EQ(r.report.statistic, 0.0);
    EXPECT_GE(r.report.p_value, 99.0 / 100.0);
    EXPECT_FALSE(r.report.reject);
  }
}

TEST(PermTest, ScaleInvariantPValues) {
  const auto data = random_dataset(15, {8, 10, 9}, 6);
  Vector c(6);
  c << 0.3, -2.0, 5.0, 1.1, -0.7, 12.0;
  const auto scaled = scale_curves(data, c);
  for (PermStatistic s : {PermStatistic::gpf, PermStatistic::fmax}) {
    const auto a = perm_test(data, s, 199, 21, 0.05);
    const auto b = perm_test(scaled, s, 199, 21, 0.05);
    EXPECT_EQ(a.report.p_value, b.report.p_value);
  }
}

TEST(PermTest, ReportFields) {
  const auto data = random_dataset(16, {6, 7}, 5);
  const auto r = perm_test(data, PermStatistic::fmax, 50, 99, 0.1);
  EXPECT_EQ(r.report.test, TestKind::fmax_rp);
  EXPECT_EQ(r.report.method(), Method::rp);
  ASSERT_TRUE(r.report.permutation.has_value());
  EXPECT_EQ(r.report.permutation->B, 50u);
  EXPECT_EQ(r.report.permutation->seed, 99u);
  EXPECT_EQ(r.null.statistic_name, "F_max");
  EXPECT_EQ(r.report.reject, r.report.p_value <= 0.1);
  EXPECT_THROW(perm_test(data, PermStatistic::gpf, 0, 1, 0.05), ValidationError);
  EXPECT_THROW(parse_perm_statistic("nope"), ValidationError);
}

TEST(PermTest, DegenerateDataRaises) {
  const Matrix a = qfcov::testing::rows({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  const auto data = make_dataset({a, a});
  EXPECT_THROW(perm_test(data, PermStatistic::gpf, 10, 1, 0.05), DegenerateDataError);
  const auto l2 = perm_test(data, PermStatistic::l2, 10, 1, 0.05);
  EXPECT_EQ(l2.report.p_value, 1.0);
}

TEST(PermTest, ExchangeabilityRankUniform) {
  // Under a Gaussian null with equal sizes, the rank of the observed statistic
  // among itself and B = 19 permuted values is approximately uniform on 1..20.
  // Permuted groups are not re-centered, so the approximation degrades for very
  // small groups (at n_i = 8 the top rank bin is clearly overfull).
  SimConfig cfg;
  cfg.J = 8;
  cfg.sizes = {20, 20, 20};
  cfg.delta = 0.0;
  for (PermStatistic s : {PermStatistic::gpf, PermStatistic::fmax}) {
    std::vector<std::size_t> bins(5, 0);
    for (std::uint64_t r = 0; r < 600; ++r) {
      const auto data = gen_dataset(cfg, derive_seed(555, {r}));
      const auto res = perm_test(data, s, 19, derive_seed(556, {r}), 0.05);
      std::size_t below = 0;
      for (double v : res.null.values) below += v < res.null.observed ? 1 : 0;
      bins[below / 4]++;
    }
    EXPECT_GT(chi2_gof_p(bins), 0.001) << to_string(test_kind(s));
  }
}
