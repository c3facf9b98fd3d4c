#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfcov/dataset.hpp"
#include "qfcov/estimators.hpp"
#include "qfcov/parallel.hpp"
#include "qfcov/report.hpp"
#include "qfcov/rng.hpp"
#include "qfcov/surfaces.hpp"

namespace qfcov {

inline constexpr std::size_t kDefaultPermutations = 500;

/// B random relabellings of the pooled subject effects, fully determined by
/// (seed, B, group sizes). Tables are drawn one after another from a single
/// Xoshiro256 stream, each by a Fisher-Yates shuffle of the identity.
struct PermutationPlan {
  std::uint64_t seed = 0;
  std::size_t B = 0;
  std::vector<std::size_t> group_sizes;
  std::vector<std::vector<std::uint32_t>> index_tables;

  std::size_t total_size() const {
    return std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  }
};

inline PermutationPlan make_plan(std::uint64_t seed, std::size_t B, std::vector<std::size_t> group_sizes) {
  if (B < 1) throw ValidationError("number of permutations must be at least 1");
  if (group_sizes.size() < 2) throw ValidationError("permutation plan needs k >= 2 groups");
  PermutationPlan plan{seed, B, std::move(group_sizes), {}};
  const std::size_t n = plan.total_size();
  if (n <= plan.group_sizes.size()) throw ValidationError("permutation plan needs n > k");
  Xoshiro256 rng(seed);
  plan.index_tables.resize(B);
  for (auto& table : plan.index_tables) {
    table.resize(n);
    std::iota(table.begin(), table.end(), std::uint32_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(table[i], table[j]);
    }
  }
  return plan;
}

/// The four statistics recomputed on one permuted sample.
struct PermutedStatistics {
  double t_star = 0.0;
  double f_star = 0.0;
  double l2_star = 0.0;
  double tmax_star = 0.0;
  std::size_t eps_hits = 0;
  /// SSE* vanished everywhere; t_star and f_star are NaN.
  bool sse_degenerate = false;
};

/// Reusable evaluator for permuted statistics over a fixed effects pool.
///
/// Rows table[0 .. n_1) of the pool form group 1, the next n_2 rows group 2,
/// and so on. Group covariances are (n_i - 1)^{-1} sum_j v*_ij v*_ij^T with no
/// re-centering. SSE* uses the fully permuted product v*(s) v*(t) and is
/// computed as sum_j v*(s)^2 v*(t)^2 - (n_i - 2) gamma*_i(s, t)^2, which is
/// the expanded square. Only the lower triangle is formed.
class PermutedStatisticsEvaluator {
 public:
  PermutedStatisticsEvaluator(const Matrix& effects_pool, std::vector<std::size_t> group_sizes,
                              const Grid& grid, double eps = kDefaultSseFloor)
      : pool_(effects_pool), sizes_(std::move(group_sizes)), grid_(grid), eps_(eps) {
    const std::size_t n = std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{0});
    if (static_cast<std::size_t>(pool_.rows()) != n)
      throw ValidationError("effects pool rows do not match the group sizes");
    if (static_cast<std::size_t>(pool_.cols()) != grid_.size())
      throw ValidationError("effects pool columns do not match the grid");
    if (sizes_.size() < 2) throw ValidationError("need k >= 2 groups");
    for (std::size_t s : sizes_)
      if (s < 2) throw ValidationError("every group needs at least 2 subjects");
    if (eps_ < 0.0) throw ValidationError("SSE floor must be nonnegative");
    n_ = n;
    const auto J = pool_.cols();
    covs_.assign(sizes_.size(), Matrix(J, J));
    sse_.resize(J, J);
    pooled_.resize(J, J);
    buffer_.resize(J, J);
  }

  PermutedStatistics operator()(std::span<const std::uint32_t> table) {
    if (table.size() != n_) throw ValidationError("index table length does not match n");
    const auto J = pool_.cols();
    const std::size_t k = sizes_.size();
    sse_.setZero();
    pooled_.setZero();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto ni = static_cast<Eigen::Index>(sizes_[i]);
      rows_.resize(ni, J);
      for (Eigen::Index j = 0; j < ni; ++j) rows_.row(j) = pool_.row(table[offset + static_cast<std::size_t>(j)]);
      offset += sizes_[i];

      Matrix& cov = covs_[i];
      cov.setZero();
      cov.selfadjointView<Eigen::Lower>().rankUpdate(rows_.transpose());
      pooled_.triangularView<Eigen::Lower>() += cov;
      cov /= static_cast<double>(ni - 1);

      squares_ = rows_.cwiseAbs2();
      buffer_.setZero();
      buffer_.selfadjointView<Eigen::Lower>().rankUpdate(squares_.transpose());
      const double shrink = static_cast<double>(ni - 2);
      for (Eigen::Index s = 0; s < J; ++s)
        for (Eigen::Index t = 0; t <= s; ++t) sse_(s, t) += buffer_(s, t) - shrink * cov(s, t) * cov(s, t);
    }
    const double n_minus_k = static_cast<double>(n_ - k);
    pooled_ /= n_minus_k;

    const auto& w = grid_.weights();
    PermutedStatistics out;
    double max_sse = 0.0;
    for (Eigen::Index s = 0; s < J; ++s) {
      for (Eigen::Index t = 0; t <= s; ++t) {
        double ssb = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const double d = covs_[i](s, t) - pooled_(s, t);
          ssb += static_cast<double>(sizes_[i] - 1) * d * d;
        }
        buffer_(s, t) = ssb;
        if (sse_(s, t) < 0.0) sse_(s, t) = 0.0;
        max_sse = std::max(max_sse, sse_(s, t));
        const double mult = (s == t) ? 1.0 : 2.0;
        out.l2_star += mult * w[static_cast<std::size_t>(s)] * w[static_cast<std::size_t>(t)] * ssb;
        out.tmax_star = std::max(out.tmax_star, ssb);
      }
    }
    if (!(max_sse > 0.0)) {
      out.sse_degenerate = true;
      out.t_star = std::numeric_limits<double>::quiet_NaN();
      out.f_star = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    const double floor = eps_ * max_sse;
    const double scale = n_minus_k / static_cast<double>(k - 1);
    for (Eigen::Index s = 0; s < J; ++s) {
      for (Eigen::Index t = 0; t <= s; ++t) {
        double denom = sse_(s, t);
        const std::size_t mult = (s == t) ? 1 : 2;
        if (denom <= floor) {
          denom = floor;
          out.eps_hits += mult;
        }
        double f;
        if (denom > 0.0)
          f = scale * buffer_(s, t) / denom;
        else
          f = buffer_(s, t) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        out.t_star += static_cast<double>(mult) * w[static_cast<std::size_t>(s)] *
                      w[static_cast<std::size_t>(t)] * f;
        out.f_star = std::max(out.f_star, f);
      }
    }
    return out;
  }

 private:
  const Matrix& pool_;
  std::vector<std::size_t> sizes_;
  const Grid& grid_;
  double eps_;
  std::size_t n_ = 0;
  std::vector<Matrix> covs_;
  Matrix sse_, pooled_, buffer_, rows_, squares_;
};

/// One-shot form of PermutedStatisticsEvaluator.
inline PermutedStatistics permuted_statistics(const Matrix& effects_pool,
                                              std::span<const std::uint32_t> table,
                                              const std::vector<std::size_t>& group_sizes,
                                              const Grid& grid, double eps = kDefaultSseFloor) {
  PermutedStatisticsEvaluator eval(effects_pool, group_sizes, grid, eps);
  return eval(table);
}

enum class PermStatistic { gpf, fmax, l2, tmax };

inline constexpr std::array<PermStatistic, 4> kAllPermStatistics = {
    PermStatistic::gpf, PermStatistic::fmax, PermStatistic::l2, PermStatistic::tmax};

inline TestKind test_kind(PermStatistic s) {
  switch (s) {
    case PermStatistic::gpf: return TestKind::gpf_rp;
    case PermStatistic::fmax: return TestKind::fmax_rp;
    case PermStatistic::l2: return TestKind::l2_rp;
    case PermStatistic::tmax: return TestKind::tmax_rp;
  }
  return TestKind::gpf_rp;
}

inline bool uses_quasi_f(PermStatistic s) { return s == PermStatistic::gpf || s == PermStatistic::fmax; }

inline PermStatistic parse_perm_statistic(std::string_view name) {
  if (name == "gpf") return PermStatistic::gpf;
  if (name == "fmax") return PermStatistic::fmax;
  if (name == "l2") return PermStatistic::l2;
  if (name == "tmax") return PermStatistic::tmax;
  throw ValidationError("unknown statistic '" + std::string(name) + "' (expected gpf, fmax, l2, tmax)");
}

inline double pick(const PermutedStatistics& p, PermStatistic s) {
  switch (s) {
    case PermStatistic::gpf: return p.t_star;
    case PermStatistic::fmax: return p.f_star;
    case PermStatistic::l2: return p.l2_star;
    case PermStatistic::tmax: return p.tmax_star;
  }
  return 0.0;
}

/// Observed statistics of the original sample, computed from the pointwise surfaces.
struct ObservedStatistics {
  std::optional<GlobalStats> quasi_f;  // absent when SSE vanishes and only SSB tests were asked for
  std::size_t eps_hits = 0;
  double l2 = 0.0;
  double tmax = 0.0;

  double value(PermStatistic s) const {
    switch (s) {
      case PermStatistic::gpf: return quasi_f->t_n;
      case PermStatistic::fmax: return quasi_f->f_max;
      case PermStatistic::l2: return l2;
      case PermStatistic::tmax: return tmax;
    }
    return 0.0;
  }
};

inline ObservedStatistics observed_statistics(const FunctionalDataset& data, bool need_quasi_f,
                                              double eps = kDefaultSseFloor) {
  ObservedStatistics obs;
  const Matrix ssb = ssb_surface(data);
  obs.l2 = integrate_surface(ssb, data.grid());
  obs.tmax = surface_max(ssb).f_max;
  if (need_quasi_f) {
    const FSurface f = quasi_f_from_parts(ssb, sse_surface(data), data.num_groups(), data.total_size(), eps);
    obs.quasi_f = globalize(f, data.grid());
    obs.eps_hits = f.eps_hits;
  }
  return obs;
}

/// Add-one permutation p-value (1 + #{null >= observed}) / (B + 1).
inline double perm_p_value(double observed, std::span<const double> null) {
  std::size_t count = 0;
  for (double v : null)
    if (v >= observed) ++count;
  return static_cast<double>(count + 1) / static_cast<double>(null.size() + 1);
}

/// Upper-alpha critical value: order statistic ceil((1 - alpha)(B + 1)), clamped to [1, B].
inline double perm_critical_value(std::span<const double> null, double alpha) {
  if (null.empty()) throw ValidationError("empty null sample");
  std::vector<double> sorted(null.begin(), null.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::ceil((1.0 - alpha) * static_cast<double>(sorted.size() + 1) - 1e-9);
  const auto rank = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(pos, 1.0)), 1, sorted.size());
  return sorted[rank - 1];
}

struct NullSample {
  std::string statistic_name;
  std::vector<double> values;
  double observed = 0.0;
};

struct PermutationResult {
  TestReport report;
  NullSample null;
};

struct PermOptions {
  double eps = kDefaultSseFloor;
  std::size_t workers = 1;
};

/// Evaluates every plan entry; results are stored by replicate index, so the
/// output does not depend on the number of workers.
inline std::vector<PermutedStatistics> evaluate_plan(const Matrix& effects_pool, const PermutationPlan& plan,
                                                     const Grid& grid, const PermOptions& opt = {}) {
  std::vector<PermutedStatistics> out(plan.B);
  const std::size_t chunks = std::clamp<std::size_t>(opt.workers, 1, plan.B);
  parallel_for(chunks, chunks, [&](std::size_t c) {
    PermutedStatisticsEvaluator eval(effects_pool, plan.group_sizes, grid, opt.eps);
    const std::size_t lo = plan.B * c / chunks;
    const std::size_t hi = plan.B * (c + 1) / chunks;
    for (std::size_t b = lo; b < hi; ++b) out[b] = eval(plan.index_tables[b]);
  });
  return out;
}

/// Runs several permutation tests on one shared plan. The order of the result
/// follows `wanted`.
inline std::vector<PermutationResult> perm_tests(const FunctionalDataset& data,
                                                 std::span<const PermStatistic> wanted, std::size_t B,
                                                 std::uint64_t seed, double alpha, const PermOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (B < 1) throw ValidationError("number of permutations must be at least 1");
  const bool need_f = std::any_of(wanted.begin(), wanted.end(), uses_quasi_f);
  const ObservedStatistics obs = observed_statistics(data, need_f, opt.eps);
  const PermutationPlan plan = make_plan(seed, B, data.group_sizes());
  const Matrix pool = effects_pool(data);
  const std::vector<PermutedStatistics> reps = evaluate_plan(pool, plan, data.grid(), opt);

  std::size_t eps_replicates = 0;
  bool degenerate = false;
  for (const auto& r : reps) {
    if (r.eps_hits > 0) ++eps_replicates;
    degenerate = degenerate || r.sse_degenerate;
  }
  if (need_f && degenerate)
    throw DegenerateDataError("SSE vanished identically in a permuted sample");

  std::vector<PermutationResult> results;
  for (PermStatistic s : wanted) {
    PermutationResult res;
    res.null.statistic_name = std::string(statistic_name(test_kind(s)));
    res.null.observed = obs.value(s);
    res.null.values.reserve(B);
    for (const auto& r : reps) res.null.values.push_back(pick(r, s));

    TestReport& rep = res.report;
    rep.test = test_kind(s);
    rep.statistic = res.null.observed;
    rep.alpha = alpha;
    rep.p_value = perm_p_value(rep.statistic, res.null.values);
    rep.critical_value = perm_critical_value(res.null.values, alpha);
    rep.reject = rep.p_value <= alpha;
    rep.eps_hits = uses_quasi_f(s) ? obs.eps_hits : 0;
    rep.permutation = PermutationInfo{B, seed, uses_quasi_f(s) ? eps_replicates : 0};
    results.push_back(std::move(res));
  }
  return results;
}

inline PermutationResult perm_test(const FunctionalDataset& data, PermStatistic statistic, std::size_t B,
                                   std::uint64_t seed, double alpha, const PermOptions& opt = {}) {
  const std::array<PermStatistic, 1> one{statistic};
  return std::move(perm_tests(data, one, B, seed, alpha, opt).front());
}

}  // namespace qfcov
