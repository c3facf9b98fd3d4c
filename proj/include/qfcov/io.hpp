#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qfcov/dataset.hpp"
#include "qfcov/density.hpp"
#include "qfcov/permutation.hpp"
#include "qfcov/report.hpp"
#include "qfcov/simulation.hpp"

namespace qfcov {

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest text that reads back as exactly the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Splits one CSV line on commas. Double-quoted fields may contain commas; no escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so `path` either keeps its old content or holds the complete new content.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Dataset files: group,subject,<J values>; optional header row starting with "group".

namespace detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<CsvRow> read_csv_rows(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    rows.push_back({line_no, split_csv_line(line)});
    if (end == text.size()) break;
  }
  return rows;
}

inline bool is_header(const CsvRow& row) {
  if (row.fields.empty()) return false;
  std::string first = row.fields.front();
  std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) { return std::tolower(c); });
  return first == "group";
}

}  // namespace detail

/// Parses the dataset format. Grid precedence: `grid_override`, then numeric
/// header values, then uniform points on [0, 1]. Groups keep first-appearance order.
inline FunctionalDataset parse_dataset(std::string_view text, const std::optional<Grid>& grid_override = std::nullopt,
                                       std::string_view source = "<input>") {
  auto rows = detail::read_csv_rows(text);
  const std::string where(source);
  if (rows.empty()) throw ValidationError(where + ": no data rows");
  std::optional<std::vector<double>> header_points;
  std::size_t first = 0;
  std::size_t width = 0;
  if (detail::is_header(rows.front())) {
    const auto& h = rows.front().fields;
    if (h.size() < 4) throw ValidationError(where + ": header needs group, subject and at least 2 grid columns");
    width = h.size();
    std::vector<double> pts;
    bool numeric = true;
    for (std::size_t c = 2; c < h.size(); ++c) {
      auto v = parse_double(h[c]);
      if (!v) {
        numeric = false;
        break;
      }
      pts.push_back(*v);
    }
    if (numeric) {
      for (std::size_t j = 0; j + 1 < pts.size(); ++j)
        if (!(pts[j] < pts[j + 1]))
          throw ValidationError(where + ": header grid values must be strictly increasing (column " +
                                std::to_string(j + 4) + ")");
      header_points = std::move(pts);
    }
    first = 1;
  }
  if (first >= rows.size()) throw ValidationError(where + ": no data rows");
  if (width == 0) width = rows[first].fields.size();
  if (width < 4) throw ValidationError(where + ": rows need group, subject and at least 2 values");
  const std::size_t J = width - 2;

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> by_group;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != width)
      throw ValidationError(where + ": line " + std::to_string(row.line) + ": expected " + std::to_string(width) +
                            " fields, got " + std::to_string(row.fields.size()));
    std::vector<double> values(J);
    for (std::size_t c = 0; c < J; ++c) {
      auto v = parse_double(row.fields[c + 2]);
      if (!v || !std::isfinite(*v))
        throw ValidationError(where + ": line " + std::to_string(row.line) + ", column " + std::to_string(c + 3) +
                              ": '" + row.fields[c + 2] + "' is not a finite number");
      values[c] = *v;
    }
    const std::string& label = row.fields[0];
    if (label.empty()) throw ValidationError(where + ": line " + std::to_string(row.line) + ": empty group label");
    if (!by_group.count(label)) order.push_back(label);
    by_group[label].push_back(std::move(values));
  }

  Grid grid = grid_override ? *grid_override
                            : header_points ? Grid::from_points(*header_points) : Grid::uniform(0.0, 1.0, J);
  if (grid.size() != J)
    throw ValidationError(where + ": grid has " + std::to_string(grid.size()) + " points but rows have " +
                          std::to_string(J) + " values");
  std::vector<FunctionalGroup> groups;
  for (const auto& label : order) {
    const auto& curves = by_group[label];
    if (curves.size() < 2)
      throw ValidationError(where + ": group '" + label + "' has " + std::to_string(curves.size()) +
                            " subject(s); at least 2 are required");
    Matrix m(static_cast<Eigen::Index>(curves.size()), static_cast<Eigen::Index>(J));
    for (std::size_t i = 0; i < curves.size(); ++i)
      for (std::size_t j = 0; j < J; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = curves[i][j];
    groups.emplace_back(label, std::move(m));
  }
  return FunctionalDataset(std::move(grid), std::move(groups));
}

inline FunctionalDataset load_dataset(const std::filesystem::path& path,
                                      const std::optional<Grid>& grid_override = std::nullopt) {
  return parse_dataset(read_text_file(path), grid_override, path.string());
}

/// Dataset file text with a numeric grid header; subjects are numbered s1, s2, ... per group.
inline std::string format_dataset(const FunctionalDataset& data) {
  std::string out = "group,subject";
  for (double t : data.grid().points()) out += "," + format_double(t);
  out += "\n";
  for (const auto& g : data.groups()) {
    for (Eigen::Index i = 0; i < g.curves().rows(); ++i) {
      out += g.label() + ",s" + std::to_string(i + 1);
      for (Eigen::Index j = 0; j < g.curves().cols(); ++j) out += "," + format_double(g.curves()(i, j));
      out += "\n";
    }
  }
  return out;
}

inline void write_dataset(const std::filesystem::path& path, const FunctionalDataset& data) {
  atomic_write(path, format_dataset(data));
}

// ---------------------------------------------------------------------------
// Survival curves from cohort counts.

/// Survival curves alive(day) / alive(day 1) restricted to days [lo, hi]
/// (one-based, inclusive). `counts` is cohorts x days.
inline FunctionalGroup survival_preprocess(const Matrix& counts, std::size_t lo, std::size_t hi,
                                           std::string label = "survival") {
  const auto days = static_cast<std::size_t>(counts.cols());
  if (lo < 2) throw ValidationError("survival day range must start at day 2 or later");
  if (hi < lo || hi > days)
    throw ValidationError("survival day range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] does not fit " + std::to_string(days) + " days");
  Matrix curves(counts.rows(), static_cast<Eigen::Index>(hi - lo + 1));
  for (Eigen::Index c = 0; c < counts.rows(); ++c) {
    const double initial = counts(c, 0);
    if (!(initial > 0.0))
      throw ValidationError("cohort " + std::to_string(c + 1) + " of '" + label + "' has no subjects on day 1");
    for (std::size_t d = lo; d <= hi; ++d)
      curves(c, static_cast<Eigen::Index>(d - lo)) = counts(c, static_cast<Eigen::Index>(d - 1)) / initial;
  }
  return FunctionalGroup(std::move(label), std::move(curves));
}

/// Cohort count table: group,cohort,day1,...,dayD with an optional header row.
inline std::vector<std::pair<std::string, Matrix>> parse_cohort_counts(std::string_view text,
                                                                        std::string_view source = "<input>") {
  auto rows = detail::read_csv_rows(text);
  const std::string where(source);
  if (!rows.empty() && detail::is_header(rows.front())) rows.erase(rows.begin());
  if (rows.empty()) throw ValidationError(where + ": no cohort rows");
  const std::size_t width = rows.front().fields.size();
  if (width < 3) throw ValidationError(where + ": rows need group, cohort and at least 1 day");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> by_group;
  for (const auto& row : rows) {
    if (row.fields.size() != width)
      throw ValidationError(where + ": line " + std::to_string(row.line) + ": expected " + std::to_string(width) +
                            " fields, got " + std::to_string(row.fields.size()));
    std::vector<double> v(width - 2);
    for (std::size_t c = 2; c < width; ++c) {
      auto x = parse_double(row.fields[c]);
      if (!x || *x < 0.0)
        throw ValidationError(where + ": line " + std::to_string(row.line) + ", column " + std::to_string(c + 1) +
                              ": '" + row.fields[c] + "' is not a nonnegative count");
      v[c - 2] = *x;
    }
    if (!by_group.count(row.fields[0])) order.push_back(row.fields[0]);
    by_group[row.fields[0]].push_back(std::move(v));
  }
  std::vector<std::pair<std::string, Matrix>> out;
  for (const auto& label : order) {
    const auto& rs = by_group[label];
    Matrix m(static_cast<Eigen::Index>(rs.size()), static_cast<Eigen::Index>(width - 2));
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = 0; j < rs[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rs[i][j];
    out.emplace_back(label, std::move(m));
  }
  return out;
}

/// Survival dataset over days [lo, hi]; the grid is the day numbers themselves.
inline FunctionalDataset survival_dataset(const std::vector<std::pair<std::string, Matrix>>& counts, std::size_t lo,
                                          std::size_t hi) {
  std::vector<FunctionalGroup> groups;
  for (const auto& [label, m] : counts) groups.push_back(survival_preprocess(m, lo, hi, label));
  std::vector<double> days;
  for (std::size_t d = lo; d <= hi; ++d) days.push_back(static_cast<double>(d));
  return FunctionalDataset(Grid::from_points(std::move(days)), std::move(groups));
}

// ---------------------------------------------------------------------------
// Report JSON

inline constexpr const char* kReportSchema = "qfcov.report/1";

using Json = nlohmann::json;

inline Json to_json(const TestReport& r) {
  Json j;
  j["test"] = std::string(r.name());
  j["statistic_name"] = std::string(statistic_name(r.test));
  j["statistic"] = r.statistic;
  j["method"] = std::string(to_string(r.method()));
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["critical_value"] = r.critical_value;
  j["reject"] = r.reject;
  j["eps_hits"] = r.eps_hits;
  if (r.ws) {
    j["beta"] = r.ws->beta;
    j["d"] = r.ws->d;
    j["tr_gamma"] = r.ws->tr_gamma;
    j["tr_gamma_sq"] = r.ws->tr_gamma_sq;
  }
  if (r.varpi) j["varpi"] = to_string(*r.varpi);
  if (r.permutation) {
    j["B"] = r.permutation->B;
    j["seed"] = r.permutation->seed;
    j["eps_replicates"] = r.permutation->eps_replicates;
  }
  return j;
}

inline TestReport test_report_from_json(const Json& j) {
  try {
    TestReport r;
    r.test = parse_test_kind(j.at("test").get<std::string>());
    r.statistic = j.at("statistic").get<double>();
    r.p_value = j.at("p_value").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.critical_value = j.at("critical_value").get<double>();
    r.reject = j.at("reject").get<bool>();
    r.eps_hits = j.at("eps_hits").get<std::size_t>();
    if (j.contains("beta"))
      r.ws = WsParams{j.at("beta").get<double>(), j.at("d").get<double>(), j.at("tr_gamma").get<double>(),
                      j.at("tr_gamma_sq").get<double>()};
    if (j.contains("varpi"))
      r.varpi = j.at("varpi").get<std::string>() == "gaussian" ? VarpiVariant::gaussian : VarpiVariant::empirical;
    if (j.contains("B"))
      r.permutation = PermutationInfo{j.at("B").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
                                      j.at("eps_replicates").get<std::size_t>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed test report: ") + e.what());
  }
}

struct GroupSummary {
  std::string label;
  std::size_t n = 0;
  bool operator==(const GroupSummary&) const = default;
};

/// Everything the `test` command writes: dataset summary plus one report per test.
struct ReportFile {
  double grid_a = 0.0;
  double grid_b = 1.0;
  std::size_t grid_points = 0;
  std::vector<GroupSummary> groups;
  std::vector<TestReport> tests;

  bool operator==(const ReportFile&) const = default;
};

inline ReportFile make_report_file(const FunctionalDataset& data, std::vector<TestReport> tests) {
  ReportFile f;
  f.grid_a = data.grid().a();
  f.grid_b = data.grid().b();
  f.grid_points = data.grid_size();
  for (const auto& g : data.groups()) f.groups.push_back({g.label(), g.size()});
  f.tests = std::move(tests);
  return f;
}

inline Json to_json(const ReportFile& f) {
  Json j;
  j["schema"] = kReportSchema;
  j["grid"] = {{"a", f.grid_a}, {"b", f.grid_b}, {"J", f.grid_points}};
  Json groups = Json::array();
  for (const auto& g : f.groups) groups.push_back({{"label", g.label}, {"n", g.n}});
  j["groups"] = groups;
  Json tests = Json::array();
  for (const auto& t : f.tests) tests.push_back(to_json(t));
  j["tests"] = tests;
  return j;
}

inline ReportFile report_file_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema)
      throw ValidationError("unsupported report schema '" + j.at("schema").get<std::string>() + "'");
    ReportFile f;
    f.grid_a = j.at("grid").at("a").get<double>();
    f.grid_b = j.at("grid").at("b").get<double>();
    f.grid_points = j.at("grid").at("J").get<std::size_t>();
    for (const auto& g : j.at("groups")) f.groups.push_back({g.at("label").get<std::string>(), g.at("n").get<std::size_t>()});
    for (const auto& t : j.at("tests")) f.tests.push_back(test_report_from_json(t));
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report file: ") + e.what());
  }
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Result tables

inline std::string format_null_sample(const NullSample& s) {
  std::string out = "statistic\n";
  for (double v : s.values) out += format_double(v) + "\n";
  return out;
}

inline std::string format_density_curve(const DensityCurve& c) {
  std::string out = "x,density\n";
  for (std::size_t i = 0; i < c.x.size(); ++i) out += format_double(c.x[i]) + "," + format_double(c.density[i]) + "\n";
  return out;
}

inline constexpr const char* kPowerCsvHeader = "model,rho,omega,n1,n2,n3,reps,B,test,reject_pct,mc_se";

/// Leading columns that identify a configuration in the power CSV.
inline std::string power_config_key(const SimConfig& cfg, std::size_t reps, std::size_t B) {
  if (cfg.k() > 3) throw ValidationError("the power-row CSV has room for at most 3 group sizes");
  std::string key = std::string(to_string(cfg.model)) + "," + format_double(cfg.rho) + "," + format_double(cfg.omega);
  for (std::size_t i = 0; i < 3; ++i) key += "," + (i < cfg.k() ? std::to_string(cfg.sizes[i]) : std::string());
  key += "," + std::to_string(reps) + "," + std::to_string(B);
  return key;
}

/// Five CSV lines (one per test) for a completed row.
inline std::string format_power_rows(const PowerRow& row) {
  const std::string key = power_config_key(row.config, row.reps, row.B);
  std::string out;
  for (std::size_t i = 0; i < kAllTests.size(); ++i)
    out += key + "," + std::string(to_string(kAllTests[i])) + "," + format_double(row.reject_pct[i]) + "," +
           format_double(row.mc_se[i]) + "\n";
  return out;
}

inline Json to_json(const PowerRow& row) {
  Json j;
  const SimConfig& c = row.config;
  j["model"] = to_string(c.model);
  j["scores"] = to_string(c.scores);
  j["rho"] = c.rho;
  j["omega"] = c.omega;
  j["delta"] = c.delta;
  j["a"] = c.a_var;
  j["q"] = c.q;
  j["J"] = c.J;
  j["sizes"] = c.sizes;
  j["reps"] = row.reps;
  j["used"] = row.used;
  j["degenerate"] = row.degenerate;
  j["B"] = row.B;
  j["alpha"] = row.alpha;
  Json tests = Json::object();
  for (std::size_t i = 0; i < kAllTests.size(); ++i)
    tests[std::string(to_string(kAllTests[i]))] = {{"reject_pct", row.reject_pct[i]}, {"mc_se", row.mc_se[i]}};
  j["tests"] = tests;
  return j;
}

}  // namespace qfcov
