// invreg: inverse-regression estimation and Cramer-von Mises bootstrap tests.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "invreg/invreg.hpp"

namespace {

using namespace invreg;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string input;
  std::string response = "y";
  std::string method = "cume";
  std::optional<int> H;
  std::string scheme = "multinomial";
  std::string variant = "b1";
  int B = 199;
  std::optional<std::uint64_t> seed;
  double alpha = 0.05;
  std::string format = "json";
  unsigned threads = 1;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("INVREG_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("INVREG_SEED must be an unsigned integer, got '") + env + "'");
  }
  return 1;
}

Method parse_method(const std::string& name, const std::optional<int>& H) {
  try {
    return Method::parse(name, H);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

Eigen::VectorXd parse_vector(const std::string& text, const char* flag) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + " expects comma-separated numbers, got '" + text + "'");
    }
  }
  if (xs.empty()) throw UsageError(std::string(flag) + " must not be empty");
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Eigen::MatrixXd parse_columns(const std::vector<std::string>& cols, std::size_t p, const char* flag) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const Eigen::VectorXd v = parse_vector(cols[k], flag);
    if (static_cast<std::size_t>(v.size()) != p)
      throw UsageError(std::string(flag) + " vectors need " + std::to_string(p) + " entries, got " +
                       std::to_string(v.size()));
    M.col(static_cast<Eigen::Index>(k)) = v;
  }
  return M;
}

TestConfig base_config(const CommonOptions& o, const RawSample& raw) {
  TestConfig c;
  c.method = parse_method(o.method, o.H);
  c.scheme = detail::parse_scheme(o.scheme);
  c.variant = detail::parse_variant(o.variant);
  c.B = o.B;
  c.alpha = o.alpha;
  c.seed = resolve_seed(o.seed);
  c.threads = o.threads;
  try {
    c.validate();
    c.method.validate(raw.n());
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return c;
}

void emit(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

void add_common(CLI::App* sub, CommonOptions& o, bool tests) {
  sub->add_option("data", o.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  sub->add_option("--response", o.response, "name of the response column")->capture_default_str();
  sub->add_option("--method", o.method, "sir, cume, sir2 or cume2")->capture_default_str();
  sub->add_option("--H", o.H, "slice count for sir and sir2");
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  if (!tests) return;
  sub->add_option("--bootstrap-scheme", o.scheme, "bootstrap weights")
      ->check(CLI::IsMember({"multinomial", "bayesian"}))
      ->capture_default_str();
  sub->add_option("--bootstrap-variant,--variant", o.variant, "b1 re-slices, b2 keeps the original slices")
      ->check(CLI::IsMember({"b1", "b2"}))
      ->capture_default_str();
  sub->add_option("--boot-reps,--B", o.B, "bootstrap replicates")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", o.seed, "master seed (default: $INVREG_SEED, else 1)");
  sub->add_option("--alpha", o.alpha, "test level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void output_reports(const std::vector<TestReport>& reports, const std::string& format) {
  if (format == "csv")
    write_test_reports_csv(std::cout, reports);
  else
    emit(to_json(reports.front()));
}

// -- simulate -----------------------------------------------------------------

struct SimulateOptions {
  std::string config_path;
  std::vector<std::string> models;
  std::vector<double> sigmas;
  std::vector<std::size_t> n_grid;
  std::vector<int> H_grid;
  bool no_cume = false;
  std::vector<std::string> variants;
  std::vector<std::string> hypotheses;
  std::string scheme;
  std::optional<int> reps;
  std::optional<int> B;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool full_scale = false;
  std::string format = "json";
  std::string output;
};

template <typename T, typename F>
std::vector<T> map_names(const std::vector<std::string>& names, F parse) {
  std::vector<T> out;
  for (const std::string& s : names) out.push_back(parse(s));
  return out;
}

void apply_yaml(const std::string& path, TableConfig& c) {
  YAML::Node y;
  try {
    y = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw UsageError("cannot read config '" + path + "': " + e.what());
  }
  static const std::vector<std::string> known{"models", "sigmas", "n", "H", "cume", "variants", "hypotheses",
                                              "scheme", "reps", "B", "alpha", "seed", "full_scale"};
  for (const auto& kv : y) {
    const std::string key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("unknown key '" + key + "' in " + path);
  }
  try {
    if (y["full_scale"] && y["full_scale"].as<bool>()) c.full_scale();
    if (y["models"]) c.models = map_names<ModelId>(y["models"].as<std::vector<std::string>>(), parse_model);
    if (y["sigmas"]) c.sigmas = y["sigmas"].as<std::vector<double>>();
    if (y["n"]) c.n_grid = y["n"].as<std::vector<std::size_t>>();
    if (y["H"]) c.H_grid = y["H"].as<std::vector<int>>();
    if (y["cume"]) c.cume = y["cume"].as<bool>();
    if (y["variants"])
      c.variants = map_names<BootVariant>(y["variants"].as<std::vector<std::string>>(), detail::parse_variant);
    if (y["hypotheses"])
      c.hypotheses = map_names<Hypothesis>(y["hypotheses"].as<std::vector<std::string>>(), detail::parse_hypothesis);
    if (y["scheme"]) c.scheme = detail::parse_scheme(y["scheme"].as<std::string>());
    if (y["reps"]) c.reps = y["reps"].as<int>();
    if (y["B"]) c.B = y["B"].as<int>();
    if (y["alpha"]) c.alpha = y["alpha"].as<double>();
    if (y["seed"]) c.seed = y["seed"].as<std::uint64_t>();
  } catch (const YAML::Exception& e) {
    throw UsageError("bad value in " + path + ": " + e.what());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

TableConfig table_config(const SimulateOptions& o) {
  TableConfig c;
  if (!o.config_path.empty()) apply_yaml(o.config_path, c);
  if (o.full_scale) c.full_scale();
  try {
    if (!o.models.empty()) c.models = map_names<ModelId>(o.models, parse_model);
    if (!o.sigmas.empty()) c.sigmas = o.sigmas;
    if (!o.n_grid.empty()) c.n_grid = o.n_grid;
    if (!o.H_grid.empty()) c.H_grid = o.H_grid;
    if (o.no_cume) c.cume = false;
    if (!o.variants.empty()) c.variants = map_names<BootVariant>(o.variants, detail::parse_variant);
    if (!o.hypotheses.empty()) c.hypotheses = map_names<Hypothesis>(o.hypotheses, detail::parse_hypothesis);
    if (!o.scheme.empty()) c.scheme = detail::parse_scheme(o.scheme);
    if (o.reps) c.reps = *o.reps;
    if (o.B) c.B = *o.B;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.seed || o.config_path.empty()) c.seed = resolve_seed(o.seed);
    c.threads = o.threads;
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse-regression dimension reduction with Cramer-von Mises bootstrap tests"};
  app.require_subcommand(1);

  CommonOptions est;
  std::optional<int> est_d;
  CLI::App* estimate = app.add_subcommand("estimate", "candidate matrix and its eigendecomposition");
  add_common(estimate, est, false);
  estimate->add_option("--d", est_d, "also report the top-d basis in X coordinates")->check(CLI::NonNegativeNumber);

  CommonOptions dim;
  std::optional<int> dim_d;
  CLI::App* test_dim = app.add_subcommand("test-dim", "test d0 = d, or estimate d sequentially when --d is absent");
  add_common(test_dim, dim, true);
  test_dim->add_option("--d", dim_d, "hypothesized dimension")->check(CLI::NonNegativeNumber);

  CommonOptions pred;
  std::vector<std::string> eta_cols;
  CLI::App* test_pred = app.add_subcommand("test-predictor", "test that eta^T X has no effect on Y");
  add_common(test_pred, pred, true);
  test_pred->add_option("--eta", eta_cols, "comma-separated column of eta in X coordinates (repeatable)")->required();

  CommonOptions meth;
  std::string process_name = "cume2";
  std::optional<int> process_H;
  int meth_d = 1;
  std::vector<std::string> beta_cols;
  CLI::App* test_meth = app.add_subcommand("test-method", "test whether the method's basis misses directions");
  add_common(test_meth, meth, true);
  test_meth->add_option("--process", process_name, "process integrated in the statistic")->capture_default_str();
  test_meth->add_option("--process-H", process_H, "slice count for a sliced --process");
  test_meth->add_option("--d", meth_d, "basis dimension")->check(CLI::NonNegativeNumber)->capture_default_str();
  test_meth->add_option("--beta", beta_cols, "fixed basis column in X coordinates instead of --method (repeatable)");

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo level and power tables");
  simulate->add_option("--config", sim.config_path, "YAML file with the grid; flags override it")
      ->check(CLI::ExistingFile);
  simulate->add_option("--models", sim.models, "tool, linear, rational, exp_noise")->delimiter(',');
  simulate->add_option("--sigmas", sim.sigmas, "noise levels")->delimiter(',');
  simulate->add_option("--n", sim.n_grid, "sample sizes")->delimiter(',');
  simulate->add_option("--H", sim.H_grid, "SIR slice counts")->delimiter(',');
  simulate->add_flag("--no-cume", sim.no_cume, "drop the CUME column");
  simulate->add_option("--variants", sim.variants, "b1,b2")->delimiter(',');
  simulate->add_option("--hypotheses", sim.hypotheses, "H0,H1")->delimiter(',');
  simulate->add_option("--bootstrap-scheme", sim.scheme, "multinomial or bayesian");
  simulate->add_option("--reps", sim.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
  simulate->add_option("--boot-reps,--B", sim.B, "bootstrap replicates")->check(CLI::PositiveNumber);
  simulate->add_option("--alpha", sim.alpha, "test level")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", sim.seed, "master seed (default: $INVREG_SEED, else 1)");
  simulate->add_option("--threads", sim.threads, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_flag("--full-scale", sim.full_scale, "1000 replications with B = 500");
  simulate->add_option("--format", sim.format, "json summary or csv table")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  simulate->add_option("--output", sim.output, "also write the CSV table to this file");

  Figure1Config fig;
  std::optional<std::uint64_t> fig_seed;
  std::string fig_format = "csv";
  CLI::App* figure1 = app.add_subcommand("figure1", "sampling laws of the rank and known-cdf estimators");
  figure1->add_option("--u", fig.u_grid, "u grid")->delimiter(',');
  figure1->add_option("--n", fig.n_grid, "sample sizes")->delimiter(',');
  figure1->add_option("--reps", fig.reps, "replications")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  figure1->add_option("--seed", fig_seed, "master seed (default: $INVREG_SEED, else 1)");
  figure1->add_option("--threads", fig.threads, "worker threads")->check(CLI::PositiveNumber);
  figure1->add_option("--format", fig_format, "csv or json")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) {
      const RawSample raw = read_csv_sample(est.input, est.response);
      const Method m = parse_method(est.method, est.H);
      try {
        m.validate(raw.n());
        if (est_d && static_cast<std::size_t>(*est_d) > raw.p()) throw DomainError("--d must not exceed p");
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
      const StandardizedSample s = standardize(raw);
      const CandidateMatrix cm = method_matrix(s, m);
      nlohmann::json j = candidate_matrix_report(cm);
      Eigen::MatrixXd basis;
      if (est_d) {
        basis = s.root_inv_cov * eigen_basis(cm, *est_d).basis;
        j["d"] = *est_d;
        j["basis"] = to_json(Eigen::MatrixXd(basis.transpose()));
      }
      if (est.format == "csv") {
        std::cout << "# schema=" << kCandidateMatrixSchema << '\n' << "# method=" << cm.method_tag << '\n';
        std::cout << "k,eigenvalue";
        for (std::size_t i = 0; i < cm.p(); ++i) std::cout << ",v" << (i + 1);
        std::cout << '\n';
        for (Eigen::Index k = 0; k < cm.eigenvalues.size(); ++k) {
          std::cout << (k + 1) << ',' << format_double(cm.eigenvalues[k]);
          for (Eigen::Index i = 0; i < cm.eigenvectors.rows(); ++i)
            std::cout << ',' << format_double(cm.eigenvectors(i, k));
          std::cout << '\n';
        }
      } else {
        emit(j);
      }
    } else if (test_dim->parsed()) {
      const RawSample raw = read_csv_sample(dim.input, dim.response);
      TestConfig c = base_config(dim, raw);
      if (dim_d) {
        if (static_cast<std::size_t>(*dim_d) >= raw.p()) throw UsageError("--d must be smaller than p");
        c.d = *dim_d;
        output_reports({run_test(TestKind::dimension, raw, c)}, dim.format);
      } else {
        const DimensionEstimate e = estimate_dimension(raw, c);
        if (dim.format == "csv")
          write_test_reports_csv(std::cout, e.tests);
        else
          emit(to_json(e));
      }
    } else if (test_pred->parsed()) {
      const RawSample raw = read_csv_sample(pred.input, pred.response);
      TestConfig c = base_config(pred, raw);
      c.eta = parse_columns(eta_cols, raw.p(), "--eta");
      c.d = static_cast<int>(raw.p()) - static_cast<int>(eta_cols.size());
      output_reports({run_test(TestKind::predictor, raw, c)}, pred.format);
    } else if (test_meth->parsed()) {
      const RawSample raw = read_csv_sample(meth.input, meth.response);
      TestConfig c = base_config(meth, raw);
      c.method = parse_method(process_name, process_H);
      try {
        c.method.validate(raw.n());
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
      if (static_cast<std::size_t>(meth_d) > raw.p()) throw UsageError("--d must not exceed p");
      c.d = meth_d;
      if (!beta_cols.empty()) {
        if (static_cast<int>(beta_cols.size()) != meth_d) throw UsageError("give exactly --d columns with --beta");
        c.beta = parse_columns(beta_cols, raw.p(), "--beta");
      } else {
        c.basis_method = parse_method(meth.method, meth.H);
      }
      output_reports({run_test(TestKind::method, raw, c)}, meth.format);
    } else if (simulate->parsed()) {
      const McResult r = table_experiment(table_config(sim));
      if (!sim.output.empty()) {
        std::ofstream out(sim.output);
        if (!out) throw InputError("cannot write '" + sim.output + "'");
        write_mc_csv(out, r);
      }
      if (sim.format == "csv")
        write_mc_csv(std::cout, r);
      else
        emit(to_json(r));
    } else if (figure1->parsed()) {
      fig.seed = resolve_seed(fig_seed);
      const std::vector<Figure1Cell> cells = figure1_experiment(fig);
      if (fig_format == "csv")
        write_figure1_csv(std::cout, cells);
      else
        emit(to_json(cells));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
