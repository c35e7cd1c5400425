#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "invreg/candidate_matrix.hpp"
#include "invreg/core_data.hpp"
#include "invreg/cvm_tests.hpp"
#include "invreg/errors.hpp"
#include "invreg/simulation.hpp"

namespace invreg {

inline constexpr const char* kTestReportSchema = "invreg.test_report/1";
inline constexpr const char* kCandidateMatrixSchema = "invreg.candidate_matrix/1";
inline constexpr const char* kDimensionSchema = "invreg.dimension_estimate/1";
inline constexpr const char* kMcResultSchema = "invreg.mc_result/1";
inline constexpr const char* kFigure1Schema = "invreg.figure1/1";

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& text, const std::string& where) {
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan")
    throw InputError("missing value at " + where);
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError("non-numeric value '" + text + "' at " + where);
  }
  if (used != text.size()) throw InputError("non-numeric value '" + text + "' at " + where);
  return x;
}

}  // namespace detail

// -- data ingestion -----------------------------------------------------------

/// Reads a comma-separated table with a header row. The response column is
/// selected by name; all other columns are predictors, in file order.
inline RawSample read_csv_sample(std::istream& in, const std::string& response) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty input: expected a header row");
  const std::vector<std::string> header = detail::split(line, ',');
  std::size_t y_col = header.size();
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == response) y_col = j;
  if (y_col == header.size()) throw InputError("response column '" + response + "' not found in header");
  if (header.size() < 2) throw InputError("need at least one predictor column besides the response");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> fields = detail::split(line, ',');
    if (fields.size() != header.size())
      throw InputError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j)
      row[j] = detail::parse_number(fields[j], "line " + std::to_string(line_no) + ", column '" + header[j] + "'");
    rows.push_back(std::move(row));
  }
  RawSample raw;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  raw.X.resize(n, p);
  raw.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      const double x = rows[static_cast<std::size_t>(i)][j];
      if (j == y_col)
        raw.Y[i] = x;
      else
        raw.X(i, c++) = x;
    }
  }
  raw.validate();
  return raw;
}

inline RawSample read_csv_sample(const std::string& path, const std::string& response) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv_sample(in, response);
}

inline void write_csv_sample(std::ostream& out, const RawSample& raw, const std::string& response = "y") {
  for (Eigen::Index j = 0; j < raw.X.cols(); ++j) out << "x" << (j + 1) << ',';
  out << response << '\n';
  for (Eigen::Index i = 0; i < raw.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.X.cols(); ++j) out << format_double(raw.X(i, j)) << ',';
    out << format_double(raw.Y[i]) << '\n';
  }
}

// -- reports ------------------------------------------------------------------

inline nlohmann::json to_json(const TestConfig& c) {
  nlohmann::json j;
  j["method"] = c.method.tag();
  j["bootstrap_scheme"] = to_string(c.scheme);
  j["bootstrap_variant"] = to_string(c.variant);
  j["B"] = c.B;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["bootstrap_standardization"] = c.bootstrap_standardization;
  j["d"] = c.d;
  if (c.eta.size() > 0) j["eta"] = to_json(Eigen::MatrixXd(c.eta.transpose()));
  if (c.basis_method) j["basis_method"] = c.basis_method->tag();
  if (c.beta.size() > 0) j["beta"] = to_json(Eigen::MatrixXd(c.beta.transpose()));
  return j;
}

/// Thread count is left out: reports must not depend on it.
inline nlohmann::json to_json(const TestReport& r) {
  nlohmann::json j;
  j["schema"] = kTestReportSchema;
  j["test"] = to_string(r.kind);
  j["n"] = r.n;
  j["p"] = r.p;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["reject"] = r.reject;
  j["config"] = to_json(r.config);
  j["boot_stats"] = r.boot_stats;
  j["warnings"] = r.warnings;
  return j;
}

inline nlohmann::json candidate_matrix_report(const CandidateMatrix& cm) {
  nlohmann::json j = to_json(cm);
  j["schema"] = kCandidateMatrixSchema;
  return j;
}

inline nlohmann::json to_json(const DimensionEstimate& e) {
  nlohmann::json j;
  j["schema"] = kDimensionSchema;
  j["d"] = e.d;
  j["tests"] = nlohmann::json::array();
  for (const TestReport& r : e.tests) j["tests"].push_back(to_json(r));
  return j;
}

inline void write_test_reports_csv(std::ostream& out, const std::vector<TestReport>& reports) {
  out << "# schema=" << kTestReportSchema << '\n';
  out << "test,method,variant,scheme,B,alpha,seed,d,n,p,statistic,p_value,reject\n";
  for (const TestReport& r : reports) {
    const TestConfig& c = r.config;
    out << to_string(r.kind) << ',' << c.method.tag() << ',' << to_string(c.variant) << ',' << to_string(c.scheme)
        << ',' << c.B << ',' << format_double(c.alpha) << ',' << c.seed << ',' << c.d << ',' << r.n << ',' << r.p
        << ',' << format_double(r.statistic) << ',' << format_double(r.p_value) << ',' << (r.reject ? 1 : 0)
        << '\n';
  }
}

// -- simulation tables --------------------------------------------------------

namespace detail {

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt, char sep = ';') {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += sep;
    s += fmt(xs[k]);
  }
  return s;
}

inline WeightScheme parse_scheme(const std::string& s) {
  if (s == "multinomial") return WeightScheme::multinomial;
  if (s == "bayesian") return WeightScheme::bayesian;
  throw InputError("unknown bootstrap scheme '" + s + "' (expected multinomial or bayesian)");
}

inline BootVariant parse_variant(const std::string& s) {
  if (s == "b1") return BootVariant::b1;
  if (s == "b2") return BootVariant::b2;
  throw InputError("unknown bootstrap variant '" + s + "' (expected b1 or b2)");
}

inline Hypothesis parse_hypothesis(const std::string& s) {
  if (s == "H0") return Hypothesis::h0;
  if (s == "H1") return Hypothesis::h1;
  throw InputError("unknown hypothesis '" + s + "'");
}

inline long long parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw InputError("bad integer '" + s + "' for " + what);
  }
  if (used != s.size()) throw InputError("bad integer '" + s + "' for " + what);
  return v;
}

template <typename T, typename F>
std::vector<T> split_list(const std::string& s, F parse) {
  std::vector<T> out;
  if (s.empty()) return out;
  for (const std::string& f : split(s, ';')) out.push_back(parse(f));
  return out;
}

}  // namespace detail

/// Table layout: '#'-prefixed key=value lines echo the configuration, then one
/// row per (model, sigma, n, hypothesis, variant) with a rejection-count column
/// per method; NA marks failed cells.
inline void write_mc_csv(std::ostream& out, const McResult& r) {
  const TableConfig& c = r.config;
  out << "# schema=" << kMcResultSchema << '\n';
  out << "# models=" << detail::join(c.models, [](ModelId m) { return to_string(m); }) << '\n';
  out << "# sigmas=" << detail::join(c.sigmas, [](double s) { return format_double(s); }) << '\n';
  out << "# n=" << detail::join(c.n_grid, [](std::size_t n) { return std::to_string(n); }) << '\n';
  out << "# H=" << detail::join(c.H_grid, [](int h) { return std::to_string(h); }) << '\n';
  out << "# cume=" << (c.cume ? 1 : 0) << '\n';
  out << "# variants=" << detail::join(c.variants, [](BootVariant v) { return to_string(v); }) << '\n';
  out << "# hypotheses=" << detail::join(c.hypotheses, [](Hypothesis h) { return to_string(h); }) << '\n';
  out << "# scheme=" << to_string(c.scheme) << '\n';
  out << "# reps=" << c.reps << '\n';
  out << "# B=" << c.B << '\n';
  out << "# alpha=" << format_double(c.alpha) << '\n';
  out << "# seed=" << c.seed << '\n';
  out << "# threads=" << c.threads << '\n';
  out << "# replications=" << r.replications << '\n';
  out << "# runtime_seconds=" << format_double(r.runtime_seconds) << '\n';
  for (const std::string& d : r.diagnostics) out << "# diagnostic=" << d << '\n';
  out << "model,sigma,n,hypothesis,variant";
  for (const std::string& t : r.method_tags) out << ',' << t;
  out << '\n';
  for (const McRow& row : r.rows) {
    out << to_string(row.model) << ',' << format_double(row.sigma) << ',' << row.n << ',' << to_string(row.hypothesis)
        << ',' << to_string(row.variant);
    for (const auto& v : row.rejections) out << ',' << (v ? std::to_string(*v) : "NA");
    out << '\n';
  }
}

inline McResult read_mc_csv(std::istream& in) {
  McResult r;
  TableConfig& c = r.config;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const std::string body = line.substr(2);
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw InputError("malformed comment line '" + line + "'");
      const std::string key = body.substr(0, eq);
      const std::string val = body.substr(eq + 1);
      if (key == "schema") {
        if (val != kMcResultSchema) throw InputError("unsupported schema '" + val + "'");
      } else if (key == "models") {
        c.models = detail::split_list<ModelId>(val, parse_model);
      } else if (key == "sigmas") {
        c.sigmas = detail::split_list<double>(val, [](const std::string& s) { return detail::parse_number(s, "sigmas"); });
      } else if (key == "n") {
        c.n_grid = detail::split_list<std::size_t>(
            val, [](const std::string& s) { return static_cast<std::size_t>(detail::parse_int(s, "n")); });
      } else if (key == "H") {
        c.H_grid = detail::split_list<int>(val, [](const std::string& s) { return static_cast<int>(detail::parse_int(s, "H")); });
      } else if (key == "cume") {
        c.cume = val == "1";
      } else if (key == "variants") {
        c.variants = detail::split_list<BootVariant>(val, detail::parse_variant);
      } else if (key == "hypotheses") {
        c.hypotheses = detail::split_list<Hypothesis>(val, detail::parse_hypothesis);
      } else if (key == "scheme") {
        c.scheme = detail::parse_scheme(val);
      } else if (key == "reps") {
        c.reps = static_cast<int>(detail::parse_int(val, "reps"));
      } else if (key == "B") {
        c.B = static_cast<int>(detail::parse_int(val, "B"));
      } else if (key == "alpha") {
        c.alpha = detail::parse_number(val, "alpha");
      } else if (key == "seed") {
        c.seed = std::stoull(val);
      } else if (key == "threads") {
        c.threads = static_cast<unsigned>(detail::parse_int(val, "threads"));
      } else if (key == "replications") {
        r.replications = static_cast<int>(detail::parse_int(val, "replications"));
      } else if (key == "runtime_seconds") {
        r.runtime_seconds = detail::parse_number(val, "runtime_seconds");
      } else if (key == "diagnostic") {
        r.diagnostics.push_back(val);
      } else {
        throw InputError("unknown key '" + key + "'");
      }
      continue;
    }
    const std::vector<std::string> f = detail::split(line, ',');
    if (!header_seen) {
      if (f.size() < 5 || f[0] != "model") throw InputError("missing table header");
      r.method_tags.assign(f.begin() + 5, f.end());
      header_seen = true;
      continue;
    }
    if (f.size() != 5 + r.method_tags.size()) throw InputError("table row has wrong field count");
    McRow row;
    row.model = parse_model(f[0]);
    row.sigma = detail::parse_number(f[1], "sigma");
    row.n = static_cast<std::size_t>(detail::parse_int(f[2], "n"));
    row.hypothesis = detail::parse_hypothesis(f[3]);
    row.variant = detail::parse_variant(f[4]);
    for (std::size_t k = 5; k < f.size(); ++k)
      row.rejections.push_back(f[k] == "NA" ? std::nullopt
                                            : std::optional<int>(static_cast<int>(detail::parse_int(f[k], "count"))));
    r.rows.push_back(std::move(row));
  }
  if (!header_seen) throw InputError("missing table header");
  return r;
}

inline nlohmann::json to_json(const McResult& r) {
  nlohmann::json j;
  j["schema"] = kMcResultSchema;
  j["replications"] = r.replications;
  j["B"] = r.config.B;
  j["alpha"] = r.config.alpha;
  j["seed"] = r.config.seed;
  j["bootstrap_scheme"] = to_string(r.config.scheme);
  j["methods"] = r.method_tags;
  j["runtime_seconds"] = r.runtime_seconds;
  j["diagnostics"] = r.diagnostics;
  j["rows"] = nlohmann::json::array();
  for (const McRow& row : r.rows) {
    nlohmann::json jr;
    jr["model"] = to_string(row.model);
    jr["sigma"] = row.sigma;
    jr["n"] = row.n;
    jr["hypothesis"] = to_string(row.hypothesis);
    jr["variant"] = to_string(row.variant);
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t k = 0; k < row.rejections.size(); ++k)
      counts[r.method_tags[k]] = row.rejections[k] ? nlohmann::json(*row.rejections[k]) : nlohmann::json(nullptr);
    jr["rejections"] = counts;
    j["rows"].push_back(jr);
  }
  return j;
}

inline void write_figure1_csv(std::ostream& out, const std::vector<Figure1Cell>& cells) {
  out << "# schema=" << kFigure1Schema << '\n';
  out << "u,n,c_true,estimator,mean,sd,q1,median,q3\n";
  auto row = [&](const Figure1Cell& c, const char* name, const Summary& s) {
    out << format_double(c.u) << ',' << c.n << ',' << format_double(c.c_true) << ',' << name << ','
        << format_double(s.mean) << ',' << format_double(s.sd) << ',' << format_double(s.q1) << ','
        << format_double(s.median) << ',' << format_double(s.q3) << '\n';
  };
  for (const Figure1Cell& c : cells) {
    row(c, "rank", c.rank);
    row(c, "known_cdf", c.known);
  }
}

inline nlohmann::json to_json(const std::vector<Figure1Cell>& cells) {
  nlohmann::json j;
  j["schema"] = kFigure1Schema;
  j["cells"] = nlohmann::json::array();
  auto summ = [](const Summary& s) {
    return nlohmann::json{{"mean", s.mean}, {"sd", s.sd}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}};
  };
  for (const Figure1Cell& c : cells)
    j["cells"].push_back({{"u", c.u}, {"n", c.n}, {"c_true", c.c_true}, {"rank", summ(c.rank)},
                          {"known_cdf", summ(c.known)}});
  return j;
}

}  // namespace invreg
