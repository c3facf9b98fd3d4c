#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "qfcov/errors.hpp"
#include "qfcov/fourth_moment.hpp"

namespace qfcov {

/// The five tests: the quasi GPF test with chi-square or permutation
/// calibration, the quasi F_max test, and the raw-SSB competitors
/// (integrated SSB and sup SSB), both permutation-calibrated.
enum class TestKind { gpf_nv, gpf_rp, fmax_rp, l2_rp, tmax_rp };

inline constexpr std::array<TestKind, 5> kAllTests = {TestKind::l2_rp, TestKind::tmax_rp,
                                                      TestKind::gpf_nv, TestKind::gpf_rp,
                                                      TestKind::fmax_rp};

inline std::string_view to_string(TestKind t) {
  switch (t) {
    case TestKind::gpf_nv: return "gpf-nv";
    case TestKind::gpf_rp: return "gpf-rp";
    case TestKind::fmax_rp: return "fmax-rp";
    case TestKind::l2_rp: return "l2-rp";
    case TestKind::tmax_rp: return "tmax-rp";
  }
  return "?";
}

inline TestKind parse_test_kind(std::string_view name) {
  for (TestKind t : kAllTests)
    if (to_string(t) == name) return t;
  throw ValidationError("unknown test '" + std::string(name) + "'");
}

/// Name of the statistic a test is built on.
inline std::string_view statistic_name(TestKind t) {
  switch (t) {
    case TestKind::gpf_nv:
    case TestKind::gpf_rp: return "T_n";
    case TestKind::fmax_rp: return "F_max";
    case TestKind::l2_rp: return "L2";
    case TestKind::tmax_rp: return "T_max";
  }
  return "?";
}

enum class Method { nv, rp };

inline std::string_view to_string(Method m) { return m == Method::nv ? "nv" : "rp"; }

/// Scaled chi-square parameters: T_n ~ beta * chi2_d.
struct WsParams {
  double beta = 0.0;
  double d = 0.0;
  double tr_gamma = 0.0;
  double tr_gamma_sq = 0.0;

  bool operator==(const WsParams&) const = default;
};

struct PermutationInfo {
  std::size_t B = 0;
  std::uint64_t seed = 0;
  /// Permutation replicates in which at least one SSE* cell hit the floor.
  std::size_t eps_replicates = 0;

  bool operator==(const PermutationInfo&) const = default;
};

struct TestReport {
  TestKind test = TestKind::gpf_nv;
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool reject = false;
  /// SSE cells floored when computing the observed statistic.
  std::size_t eps_hits = 0;
  std::optional<WsParams> ws;
  std::optional<VarpiVariant> varpi;
  std::optional<PermutationInfo> permutation;

  Method method() const { return test == TestKind::gpf_nv ? Method::nv : Method::rp; }
  std::string_view name() const { return to_string(test); }

  bool operator==(const TestReport&) const = default;
};

}  // namespace qfcov
