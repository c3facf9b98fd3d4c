#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qfcov/density.hpp"
#include "qfcov/io.hpp"
#include "qfcov/permutation.hpp"
#include "qfcov/simulation.hpp"
#include "qfcov/ws.hpp"

namespace qfcov {

namespace cli_detail {

inline std::optional<Grid> grid_from_range(const std::vector<double>& range, std::size_t J_hint) {
  if (range.empty()) return std::nullopt;
  if (range.size() != 2) throw ValidationError("--grid expects a,b");
  return Grid::uniform(range[0], range[1], J_hint);
}

inline FunctionalDataset load_for_cli(const std::string& path, const std::vector<double>& grid_range,
                                      const std::vector<std::string>& groups) {
  FunctionalDataset data = load_dataset(path);
  if (!grid_range.empty()) data = load_dataset(path, grid_from_range(grid_range, data.grid_size()));
  if (!groups.empty()) data = select_groups(data, groups);
  return data;
}

inline std::string pct(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * p);
  return buf;
}

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void print_report_table(std::ostream& out, const FunctionalDataset& data, const std::vector<TestReport>& reports) {
  out << "groups:";
  for (const auto& g : data.groups()) out << " " << g.label() << "(n=" << g.size() << ")";
  out << "  grid: J=" << data.grid_size() << " on [" << num(data.grid().a()) << ", " << num(data.grid().b()) << "]\n";
  out << std::left << std::setw(10) << "test" << std::setw(8) << "stat" << std::setw(14) << "value"
      << std::setw(12) << "p-value(%)" << std::setw(8) << "reject"
      << "details\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << r.name() << std::setw(8) << statistic_name(r.test) << std::setw(14)
        << num(r.statistic) << std::setw(12) << pct(r.p_value) << std::setw(8) << (r.reject ? "yes" : "no");
    if (r.ws) out << "beta=" << num(r.ws->beta) << " d=" << num(r.ws->d) << " crit=" << num(r.critical_value);
    if (r.permutation)
      out << "B=" << r.permutation->B << " seed=" << r.permutation->seed << " crit=" << num(r.critical_value);
    if (r.eps_hits) out << " eps_hits=" << r.eps_hits;
    out << "\n";
  }
}

struct TestArgs {
  std::string data;
  std::vector<std::string> tests{"gpf-nv", "gpf-rp", "fmax-rp", "l2-rp", "tmax-rp"};
  std::vector<std::string> groups;
  std::vector<double> grid;
  double alpha = 0.05;
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 1;
  std::string varpi = "empirical";
  std::string out;
  double eps = kDefaultSseFloor;
  std::size_t threads = default_workers();
};

inline int run_test(const TestArgs& a, bool varpi_given, std::ostream& out, std::ostream& err) {
  const FunctionalDataset data = load_for_cli(a.data, a.grid, a.groups);
  std::vector<TestKind> kinds;
  for (const auto& t : a.tests) kinds.push_back(parse_test_kind(t));
  const bool want_nv = std::find(kinds.begin(), kinds.end(), TestKind::gpf_nv) != kinds.end();
  if (varpi_given && !want_nv) err << "warning: --varpi only affects gpf-nv, which was not selected; ignoring\n";
  if (a.varpi != "empirical" && a.varpi != "gaussian")
    throw ValidationError("--varpi must be empirical or gaussian");

  std::vector<PermStatistic> perm;
  for (TestKind k : kinds) {
    switch (k) {
      case TestKind::gpf_rp: perm.push_back(PermStatistic::gpf); break;
      case TestKind::fmax_rp: perm.push_back(PermStatistic::fmax); break;
      case TestKind::l2_rp: perm.push_back(PermStatistic::l2); break;
      case TestKind::tmax_rp: perm.push_back(PermStatistic::tmax); break;
      case TestKind::gpf_nv: break;
    }
  }
  std::map<TestKind, TestReport> done;
  if (want_nv) {
    GpfOptions g;
    g.varpi = a.varpi == "gaussian" ? VarpiVariant::gaussian : VarpiVariant::empirical;
    g.eps = a.eps;
    done[TestKind::gpf_nv] = gpf_nv(data, a.alpha, g);
  }
  if (!perm.empty()) {
    for (auto& r : perm_tests(data, perm, a.permutations, a.seed, a.alpha, PermOptions{a.eps, a.threads}))
      done[r.report.test] = r.report;
  }
  std::vector<TestReport> reports;
  for (TestKind k : kinds) reports.push_back(done.at(k));
  print_report_table(out, data, reports);
  if (!a.out.empty()) atomic_write(a.out, dump_json(to_json(make_report_file(data, reports))));
  return 0;
}

struct SimulateArgs {
  std::string model = "m31";
  std::vector<double> rho{0.5};
  std::vector<double> omega{0.0};
  std::vector<std::size_t> sizes{30, 40, 50};
  std::size_t reps = 2000;
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 1;
  std::string scores = "gaussian";
  std::string out;
  std::string json_out;
  std::size_t J = 80;
  double alpha = 0.05;
  double delta = 0.1;
  std::size_t threads = default_workers();
  bool resume = false;
};

/// Lines of a partial power CSV grouped by their configuration key.
inline std::map<std::string, std::vector<std::string>> read_partial_rows(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line != kPowerCsvHeader) return {};
      continue;
    }
    std::size_t cut = std::string::npos;
    std::size_t commas = 0;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (line[i] == ',' && ++commas == 8) {
        cut = i;
        break;
      }
    if (cut == std::string::npos) continue;
    rows[line.substr(0, cut)].push_back(line + "\n");
  }
  return rows;
}

inline int run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw ValidationError("--out is required");
  std::vector<SimConfig> configs;
  for (double rho : a.rho) {
    for (double omega : a.omega) {
      SimConfig c;
      c.model = parse_model(a.model);
      c.scores = parse_score_dist(a.scores);
      c.rho = rho;
      c.omega = omega;
      c.sizes = a.sizes;
      c.J = a.J;
      c.delta = a.delta;
      c.validate();
      power_config_key(c, a.reps, a.permutations);
      configs.push_back(c);
    }
  }
  StudyOptions opt;
  opt.reps = a.reps;
  opt.B = a.permutations;
  opt.alpha = a.alpha;
  opt.seed = a.seed;
  opt.workers = a.threads;

  const std::filesystem::path final_path(a.out);
  std::filesystem::path partial = final_path;
  partial += ".partial";
  std::map<std::string, std::vector<std::string>> previous;
  if (a.resume && std::filesystem::exists(partial)) previous = read_partial_rows(partial);

  std::ofstream csv(partial, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write '" + partial.string() + "'");
  csv << kPowerCsvHeader << "\n";
  nlohmann::json rows_json = nlohmann::json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const std::string key = power_config_key(configs[c], a.reps, a.permutations);
    auto it = previous.find(key);
    if (it != previous.end() && it->second.size() == kAllTests.size() && a.json_out.empty()) {
      for (const auto& line : it->second) csv << line;
      csv.flush();
      err << "resumed " << key << "\n";
      continue;
    }
    const PowerRow row = run_power_config(configs[c], opt, derive_seed(opt.seed, {c}));
    csv << format_power_rows(row);
    csv.flush();
    rows_json.push_back(to_json(row));
    out << to_string(row.config.model) << " rho=" << num(row.config.rho) << " omega=" << num(row.config.omega)
        << " reps=" << row.used << "/" << row.reps;
    for (std::size_t i = 0; i < kAllTests.size(); ++i) out << "  " << to_string(kAllTests[i]) << "=" << num(row.reject_pct[i]);
    if (row.degenerate) out << "  degenerate=" << row.degenerate;
    out << "\n";
  }
  csv.close();
  if (!csv) throw std::runtime_error("write to '" + partial.string() + "' failed");
  if (!a.json_out.empty()) atomic_write(a.json_out, dump_json(rows_json));
  std::filesystem::rename(partial, final_path);
  return 0;
}

struct NullPdfArgs {
  std::string data;
  std::string statistic = "gpf";
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 1;
  std::string out;
  std::string kde_out;
  std::size_t kde_points = 512;
  std::vector<std::string> groups;
  std::vector<double> grid;
  std::size_t threads = default_workers();
};

inline int run_nullpdf(const NullPdfArgs& a, std::ostream& out) {
  const FunctionalDataset data = load_for_cli(a.data, a.grid, a.groups);
  const PermStatistic s = parse_perm_statistic(a.statistic);
  const PermutationResult res = perm_test(data, s, a.permutations, a.seed, 0.05, PermOptions{kDefaultSseFloor, a.threads});
  const DensityCurve curve = kde_curve(res.null.values, a.kde_points);
  std::filesystem::path kde_path = a.kde_out;
  if (kde_path.empty()) {
    kde_path = a.out;
    kde_path.replace_extension();
    kde_path += ".kde.csv";
  }
  atomic_write(a.out, format_null_sample(res.null));
  atomic_write(kde_path, format_density_curve(curve));
  out << res.null.statistic_name << " observed=" << num(res.null.observed) << " p-value(%)="
      << pct(res.report.p_value) << " B=" << a.permutations << " bandwidth=" << num(curve.bandwidth) << "\n";
  out << "null sample -> " << a.out << "\nkde curve   -> " << kde_path.string() << "\n";
  return 0;
}

struct SurvivalArgs {
  std::string counts;
  std::vector<std::size_t> days{2, 31};
  std::string out;
};

inline int run_survival(const SurvivalArgs& a, std::ostream& out) {
  if (a.days.size() != 2) throw ValidationError("--days expects lo,hi");
  const auto counts = parse_cohort_counts(read_text_file(a.counts), a.counts);
  const FunctionalDataset data = survival_dataset(counts, a.days[0], a.days[1]);
  atomic_write(a.out, format_dataset(data));
  out << "wrote " << data.num_groups() << " groups, J=" << data.grid_size() << " -> " << a.out << "\n";
  return 0;
}

}  // namespace cli_detail

/// Entry point of the `qfcov` tool. Returns 0 on success, 2 on invalid input
/// or usage, 1 when a statistic is undefined for the data or I/O fails.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"qfcov: tests for equality of covariance functions of functional samples"};
  app.require_subcommand(1);

  TestArgs ta;
  auto* test = app.add_subcommand("test", "Run the equal-covariance tests on a dataset file");
  test->add_option("--data", ta.data, "Dataset CSV (group,subject,values...)")->required();
  test->add_option("--tests", ta.tests, "Comma-separated subset of gpf-nv,gpf-rp,fmax-rp,l2-rp,tmax-rp")->delimiter(',');
  test->add_option("--groups", ta.groups, "Only compare these group labels")->delimiter(',');
  test->add_option("--grid", ta.grid, "Override the grid with uniform points on a,b")->delimiter(',')->expected(2);
  test->add_option("--alpha", ta.alpha, "Significance level")->capture_default_str();
  test->add_option("--permutations", ta.permutations, "Permutation count B")->capture_default_str();
  test->add_option("--seed", ta.seed, "Permutation seed")->capture_default_str();
  auto* varpi_opt = test->add_option("--varpi", ta.varpi, "Fourth-moment estimator for gpf-nv: empirical|gaussian");
  test->add_option("--out", ta.out, "Write the JSON report here");
  test->add_option("--eps", ta.eps, "Relative SSE floor")->capture_default_str();
  test->add_option("--threads", ta.threads, "Worker threads");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo size/power study, one CSV row block per configuration");
  sim->add_option("--model", sa.model, "m31|m32")->capture_default_str();
  sim->add_option("--rho", sa.rho, "Decay rate(s); repeatable")->delimiter(',');
  sim->add_option("--omega", sa.omega, "Covariance difference(s); repeatable")->delimiter(',');
  sim->add_option("--sizes", sa.sizes, "Group sizes n1,n2,n3")->delimiter(',');
  sim->add_option("--reps", sa.reps, "Monte Carlo replications")->capture_default_str();
  sim->add_option("--permutations", sa.permutations, "Permutation count B")->capture_default_str();
  sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  sim->add_option("--scores", sa.scores, "gaussian|t4")->capture_default_str();
  sim->add_option("--out", sa.out, "Power-row CSV")->required();
  sim->add_option("--json", sa.json_out, "Also write the rows as JSON");
  sim->add_option("--J", sa.J, "Grid size")->capture_default_str();
  sim->add_option("--alpha", sa.alpha, "Significance level")->capture_default_str();
  sim->add_option("--delta", sa.delta, "Mean-shift size")->capture_default_str();
  sim->add_option("--threads", sa.threads, "Worker threads");
  sim->add_flag("--resume", sa.resume, "Reuse completed rows from <out>.partial");

  NullPdfArgs na;
  auto* nullpdf = app.add_subcommand("nullpdf", "Permutation null sample and its kernel density estimate");
  nullpdf->add_option("--data", na.data, "Dataset CSV")->required();
  nullpdf->add_option("--statistic", na.statistic, "gpf|fmax|l2|tmax")->capture_default_str();
  nullpdf->add_option("--permutations", na.permutations, "Permutation count B")->capture_default_str();
  nullpdf->add_option("--seed", na.seed, "Permutation seed")->capture_default_str();
  nullpdf->add_option("--out", na.out, "Null-sample CSV")->required();
  nullpdf->add_option("--kde-out", na.kde_out, "KDE curve CSV (default: <out stem>.kde.csv)");
  nullpdf->add_option("--kde-points", na.kde_points, "KDE evaluation points")->capture_default_str();
  nullpdf->add_option("--groups", na.groups, "Only use these group labels")->delimiter(',');
  nullpdf->add_option("--grid", na.grid, "Override the grid with uniform points on a,b")->delimiter(',')->expected(2);
  nullpdf->add_option("--threads", na.threads, "Worker threads");

  SurvivalArgs va;
  auto* surv = app.add_subcommand("survival", "Convert cohort alive counts into a survival-curve dataset");
  surv->add_option("--counts", va.counts, "CSV: group,cohort,day1,...,dayD")->required();
  surv->add_option("--days", va.days, "Day range lo,hi (one-based)")->delimiter(',')->expected(2);
  surv->add_option("--out", va.out, "Dataset CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*test) return run_test(ta, varpi_opt->count() > 0, out, err);
    if (*sim) return run_simulate(sa, out, err);
    if (*nullpdf) return run_nullpdf(na, out);
    if (*surv) return run_survival(va, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateDataError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace qfcov
