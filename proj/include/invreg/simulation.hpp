#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "invreg/bootstrap.hpp"
#include "invreg/candidate_matrix.hpp"
#include "invreg/core_data.hpp"
#include "invreg/cvm_tests.hpp"
#include "invreg/empirical_process.hpp"
#include "invreg/errors.hpp"
#include "invreg/parallel.hpp"
#include "invreg/rng.hpp"

namespace invreg {

// -- models -------------------------------------------------------------------

enum class ModelId { tool, linear, rational, exp_noise };

inline std::string to_string(ModelId m) {
  switch (m) {
    case ModelId::tool:
      return "tool";
    case ModelId::linear:
      return "linear";
    case ModelId::rational:
      return "rational";
    case ModelId::exp_noise:
      return "exp_noise";
  }
  return "?";
}

inline ModelId parse_model(const std::string& name) {
  for (ModelId m : {ModelId::tool, ModelId::linear, ModelId::rational, ModelId::exp_noise})
    if (to_string(m) == name) return m;
  throw DomainError("unknown model '" + name + "' (expected tool, linear, rational or exp_noise)");
}

inline constexpr int kModelPredictors = 4;

/// Four standard normal predictors X and standard normal noise e.
///   tool:      Y = X1 + 0.1 e
///   linear:    Y = X1 + sigma e
///   rational:  Y = X1 / (0.5 + (2 + X2 + X3)^2) + sigma e
///   exp_noise: Y = exp(X1) sigma e
struct ModelSpec {
  ModelId id = ModelId::linear;
  double sigma = 0.5;
  std::size_t n = 100;

  void validate() const {
    if (!(sigma > 0.0)) throw DomainError("model noise sigma must be positive");
    if (n < 2) throw DomainError("model sample size must be >= 2");
  }
};

inline RawSample gen_model(const ModelSpec& spec, RngStream& rng) {
  spec.validate();
  RawSample raw;
  const auto n = static_cast<Eigen::Index>(spec.n);
  raw.X.resize(n, kModelPredictors);
  raw.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < kModelPredictors; ++j) raw.X(i, j) = rng.normal();
    const double e = rng.normal();
    const double x1 = raw.X(i, 0);
    switch (spec.id) {
      case ModelId::tool:
        raw.Y[i] = x1 + 0.1 * e;
        break;
      case ModelId::linear:
        raw.Y[i] = x1 + spec.sigma * e;
        break;
      case ModelId::rational: {
        const double t = 2.0 + raw.X(i, 1) + raw.X(i, 2);
        raw.Y[i] = x1 / (0.5 + t * t) + spec.sigma * e;
        break;
      }
      case ModelId::exp_noise:
        raw.Y[i] = std::exp(x1) * spec.sigma * e;
        break;
    }
  }
  return raw;
}

/// Standardization with the population moments of the models (mean 0, identity).
inline StandardizedSample standardize_population(const RawSample& raw) {
  const auto p = static_cast<Eigen::Index>(raw.p());
  return standardize_known(raw, Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p));
}

/// Law of Y in the tool model: N(0, 1.01).
inline const boost::math::normal_distribution<double>& tool_response_law() {
  static const boost::math::normal_distribution<double> law(0.0, std::sqrt(1.01));
  return law;
}

inline double tool_response_cdf(double y) { return boost::math::cdf(tool_response_law(), y); }

inline double tool_response_quantile(double u) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(tool_response_law(), u);
}

/// First coordinate of c_F(u) = E[Z 1{Y <= F^-(u)}] in the tool model, by
/// adaptive quadrature of E[Z1 Phi((F^-(u) - Z1) / 0.1)]. The other
/// coordinates vanish.
inline double tool_model_cF(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("u must lie in [0,1]");
  if (u == 0.0 || u == 1.0) return 0.0;
  const double q = tool_response_quantile(u);
  const boost::math::normal_distribution<double> std_normal;
  auto f = [&](double z) {
    return z * boost::math::pdf(std_normal, z) * boost::math::cdf(std_normal, (q - z) / 0.1);
  };
  const double inf = std::numeric_limits<double>::infinity();
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-12);
}

// -- distribution summaries ---------------------------------------------------

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Type-7 sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Summary summarize(std::vector<double> x) {
  if (x.empty()) throw DomainError("summary of empty data");
  Summary s;
  const double m = static_cast<double>(x.size());
  for (double v : x) s.mean += v;
  s.mean /= m;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.sd = x.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  std::sort(x.begin(), x.end());
  s.q1 = sorted_quantile(x, 0.25);
  s.median = sorted_quantile(x, 0.5);
  s.q3 = sorted_quantile(x, 0.75);
  return s;
}

/// sup_t |F_a(t) - F_b(t)| between two empirical distributions.
inline double kolmogorov_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("Kolmogorov distance of empty data");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    const double t = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

// -- figure 1 -----------------------------------------------------------------

struct Figure1Config {
  std::vector<double> u_grid{0.1, 0.25, 0.5, 0.75, 0.9};
  std::vector<std::size_t> n_grid{50, 200};
  int reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// One (u, n) cell: sqrt(n)(c_hat(u) - c_F(u)), first coordinate, for the
/// rank estimator (empirical cdf) and the known-cdf estimator.
struct Figure1Cell {
  double u = 0.0;
  std::size_t n = 0;
  double c_true = 0.0;
  Summary rank;
  Summary known;
};

struct Figure1Draws {
  std::vector<std::vector<double>> rank;   // [cell][rep]
  std::vector<std::vector<double>> known;  // [cell][rep]
};

/// Raw replicate values of the figure-1 experiment, cells ordered n-major.
inline Figure1Draws figure1_draws(const Figure1Config& cfg) {
  if (cfg.reps < 2) throw DomainError("figure1 needs reps >= 2");
  for (double u : cfg.u_grid)
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("figure1 u grid must lie in [0,1]");
  std::vector<double> c_true(cfg.u_grid.size());
  for (std::size_t k = 0; k < cfg.u_grid.size(); ++k) c_true[k] = tool_model_cF(cfg.u_grid[k]);

  const std::size_t cells = cfg.u_grid.size() * cfg.n_grid.size();
  const auto reps = static_cast<std::size_t>(cfg.reps);
  Figure1Draws out;
  out.rank.assign(cells, std::vector<double>(reps));
  out.known.assign(cells, std::vector<double>(reps));
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const std::size_t n = cfg.n_grid[ni];
    const double root_n = std::sqrt(static_cast<double>(n));
    RngStream base = RngStream(cfg.seed, 0).substream(ni);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      RngStream rng = base.substream(r);
      const RawSample raw = gen_model({ModelId::tool, 0.1, n}, rng);
      const StandardizedSample s = standardize_population(raw);
      const StepProcess rank_proc = first_moment_rank(s);
      const StepProcess known_proc = first_moment_known_cdf(s, tool_response_cdf);
      for (std::size_t k = 0; k < cfg.u_grid.size(); ++k) {
        const double u = cfg.u_grid[k];
        const std::size_t cell = ni * cfg.u_grid.size() + k;
        out.rank[cell][r] = root_n * (rank_proc.evaluate(u)(0, 0) - c_true[k]);
        out.known[cell][r] = root_n * (known_proc.evaluate(u)(0, 0) - c_true[k]);
      }
    });
  }
  return out;
}

inline std::vector<Figure1Cell> figure1_experiment(const Figure1Config& cfg) {
  const Figure1Draws draws = figure1_draws(cfg);
  std::vector<Figure1Cell> cells;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
    for (std::size_t k = 0; k < cfg.u_grid.size(); ++k) {
      const std::size_t cell = ni * cfg.u_grid.size() + k;
      Figure1Cell c;
      c.u = cfg.u_grid[k];
      c.n = cfg.n_grid[ni];
      c.c_true = tool_model_cF(c.u);
      c.rank = summarize(draws.rank[cell]);
      c.known = summarize(draws.known[cell]);
      cells.push_back(c);
    }
  return cells;
}

// -- bootstrap law vs sampling law -------------------------------------------

struct BootstrapLawResult {
  std::vector<double> bootstrap;  // sqrt(n)(c*(u) - c_hat(u)) over draws from one sample
  std::vector<double> sampling;   // sqrt(n)(c_hat(u) - c_F(u)) over independent samples
  double kolmogorov = 0.0;
};

/// First coordinate at u of the rank process in the tool model, its bootstrap
/// law from one sample and its Monte Carlo sampling law.
inline BootstrapLawResult bootstrap_law_experiment(std::size_t n, double u, int draws, int samples, BootVariant variant,
                                                   WeightScheme scheme, std::uint64_t seed, unsigned threads = 1) {
  const double root_n = std::sqrt(static_cast<double>(n));
  const double c_true = tool_model_cF(u);
  BootstrapLawResult out;
  out.bootstrap.resize(static_cast<std::size_t>(draws));
  out.sampling.resize(static_cast<std::size_t>(samples));

  RngStream root(seed, 0);
  RngStream data_rng = root.substream(0);
  const StandardizedSample s = standardize_population(gen_model({ModelId::tool, 0.1, n}, data_rng));
  const double c_hat = first_moment_rank(s).evaluate(u)(0, 0);
  const RngStream boot_base = root.substream(1);
  parallel_for(out.bootstrap.size(), threads, [&](std::size_t b) {
    RngStream rng = boot_base.substream(b);
    const BootstrapWeights w = gen_weights(scheme, n, rng);
    out.bootstrap[b] = root_n * (bootstrap_first_moment(s, w, variant).evaluate(u)(0, 0) - c_hat);
  });

  const RngStream mc_base = root.substream(2);
  parallel_for(out.sampling.size(), threads, [&](std::size_t r) {
    RngStream rng = mc_base.substream(r);
    const StandardizedSample sr = standardize_population(gen_model({ModelId::tool, 0.1, n}, rng));
    out.sampling[r] = root_n * (first_moment_rank(sr).evaluate(u)(0, 0) - c_true);
  });
  out.kolmogorov = kolmogorov_distance(out.bootstrap, out.sampling);
  return out;
}

// -- covariance function ------------------------------------------------------

struct CovCell {
  double u = 0.0;
  double v = 0.0;
  Eigen::MatrixXd monte_carlo;     // cov of sqrt(n)(c_hat(u) - c(u)), sqrt(n)(c_hat(v) - c(v))
  Eigen::MatrixXd monte_carlo_se;  // entrywise standard errors
  Eigen::MatrixXd direct;          // cov(Z 1{Y <= F^-(u)}, Z 1{Y <= F^-(v)}) from one large sample
  Eigen::MatrixXd direct_se;
};

struct CovConfig {
  std::vector<std::pair<double, double>> pairs{{0.25, 0.5}, {1.0, 1.0}, {0.0, 0.5}};
  std::size_t n = 200;
  int reps = 2000;
  std::size_t direct_n = 200000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

namespace detail {

/// Cross-covariance of paired rows of A and B (each reps x p), with entrywise
/// standard errors of the product means.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> cross_covariance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index m = A.rows();
  const Eigen::MatrixXd Ac = A.rowwise() - A.colwise().mean();
  const Eigen::MatrixXd Bc = B.rowwise() - B.colwise().mean();
  const Eigen::MatrixXd cov = Ac.transpose() * Bc / static_cast<double>(m - 1);
  Eigen::MatrixXd se(A.cols(), B.cols());
  for (Eigen::Index a = 0; a < A.cols(); ++a)
    for (Eigen::Index b = 0; b < B.cols(); ++b) {
      const Eigen::ArrayXd prod = Ac.col(a).array() * Bc.col(b).array();
      const double mean = prod.mean();
      const double var = (prod - mean).square().sum() / static_cast<double>(m - 1);
      se(a, b) = std::sqrt(var / static_cast<double>(m));
    }
  return {cov, se};
}

}  // namespace detail

/// Monte Carlo covariance of the known-cdf process in the tool model against a
/// direct one-sample estimate of the limiting covariance function.
inline std::vector<CovCell> empirical_cov_process(const CovConfig& cfg) {
  if (cfg.reps < 3) throw DomainError("covariance experiment needs reps >= 3");
  std::vector<double> us;
  for (const auto& [u, v] : cfg.pairs) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) throw DomainError("covariance grid must lie in [0,1]");
    us.push_back(u);
    us.push_back(v);
  }
  const Eigen::Index p = kModelPredictors;
  const auto reps = static_cast<std::size_t>(cfg.reps);
  const double root_n = std::sqrt(static_cast<double>(cfg.n));
  std::vector<Eigen::MatrixXd> draws(us.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(reps), p));

  RngStream root(cfg.seed, 0);
  const RngStream mc_base = root.substream(0);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    RngStream rng = mc_base.substream(r);
    const StandardizedSample s = standardize_population(gen_model({ModelId::tool, 0.1, cfg.n}, rng));
    const StepProcess proc = first_moment_known_cdf(s, tool_response_cdf);
    for (std::size_t k = 0; k < us.size(); ++k) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
      c[0] = tool_model_cF(us[k]);
      draws[k].row(static_cast<Eigen::Index>(r)) = (root_n * (proc.evaluate(us[k]).col(0) - c)).transpose();
    }
  });

  RngStream direct_rng = root.substream(1);
  const StandardizedSample big = standardize_population(gen_model({ModelId::tool, 0.1, cfg.direct_n}, direct_rng));
  auto indicator_terms = [&](double u) {
    const double q = tool_response_quantile(u);
    Eigen::MatrixXd T(big.Z.rows(), p);
    for (Eigen::Index i = 0; i < big.Z.rows(); ++i)
      T.row(i) = big.Y[i] <= q ? Eigen::RowVectorXd(big.Z.row(i)) : Eigen::RowVectorXd::Zero(p);
    return T;
  };

  std::vector<CovCell> out;
  for (std::size_t k = 0; k < cfg.pairs.size(); ++k) {
    CovCell cell;
    cell.u = cfg.pairs[k].first;
    cell.v = cfg.pairs[k].second;
    std::tie(cell.monte_carlo, cell.monte_carlo_se) = detail::cross_covariance(draws[2 * k], draws[2 * k + 1]);
    std::tie(cell.direct, cell.direct_se) = detail::cross_covariance(indicator_terms(cell.u), indicator_terms(cell.v));
    out.push_back(std::move(cell));
  }
  return out;
}

// -- tables -------------------------------------------------------------------

enum class Hypothesis { h0, h1 };

inline std::string to_string(Hypothesis h) { return h == Hypothesis::h0 ? "H0" : "H1"; }

/// Direction tested for no effect: e4 under H0, e1 under H1.
inline Eigen::VectorXd hypothesis_eta(Hypothesis h) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(kModelPredictors);
  eta[h == Hypothesis::h0 ? 3 : 0] = 1.0;
  return eta;
}

struct TableConfig {
  std::vector<ModelId> models{ModelId::linear};
  std::vector<double> sigmas{0.5};
  std::vector<std::size_t> n_grid{30, 100, 200};
  std::vector<int> H_grid{3, 5, 7, 10};
  bool cume = true;
  std::vector<BootVariant> variants{BootVariant::b1, BootVariant::b2};
  std::vector<Hypothesis> hypotheses{Hypothesis::h0, Hypothesis::h1};
  WeightScheme scheme = WeightScheme::multinomial;
  int reps = 200;
  int B = 199;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// Full-scale replication counts.
  void full_scale() {
    reps = 1000;
    B = 500;
  }

  std::vector<Method> methods() const {
    std::vector<Method> m;
    for (int H : H_grid) m.push_back(Method::sir(H));
    if (cume) m.push_back(Method::cume());
    return m;
  }

  void validate() const {
    if (models.empty() || sigmas.empty() || n_grid.empty() || variants.empty() || hypotheses.empty())
      throw DomainError("simulation grids must be non-empty");
    if (H_grid.empty() && !cume) throw DomainError("simulation needs at least one method");
    for (double s : sigmas)
      if (!(s > 0.0)) throw DomainError("sigma must be positive");
    for (std::size_t n : n_grid)
      for (int H : H_grid)
        if (H < 2 || static_cast<std::size_t>(H) > n) throw DomainError("slice count H must satisfy 2 <= H <= n");
    if (reps < 1) throw DomainError("reps must be >= 1");
    if (B < 1) throw DomainError("B must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  }

  bool operator==(const TableConfig&) const = default;
};

/// One table row: a (model, sigma, n, hypothesis, variant) cell across methods.
struct McRow {
  ModelId model = ModelId::linear;
  double sigma = 0.0;
  std::size_t n = 0;
  Hypothesis hypothesis = Hypothesis::h0;
  BootVariant variant = BootVariant::b1;
  std::vector<std::optional<int>> rejections;  // per method; nullopt = NA

  bool operator==(const McRow&) const = default;
};

struct McResult {
  TableConfig config;
  int replications = 0;
  std::vector<std::string> method_tags;
  std::vector<McRow> rows;
  std::vector<std::string> diagnostics;
  double runtime_seconds = 0.0;

  bool operator==(const McResult&) const = default;
};

/// Rejection counts over replications of each (model, sigma, n) sample; every
/// replicate sample is shared by all hypotheses, variants and methods. Cells
/// where any replication aborts are reported as NA with a diagnostic.
inline McResult table_experiment(const TableConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Method> methods = cfg.methods();
  McResult out;
  out.config = cfg;
  out.replications = cfg.reps;
  for (const Method& m : methods) out.method_tags.push_back(m.tag());

  const std::size_t per_sample = cfg.hypotheses.size() * cfg.variants.size() * methods.size();
  const auto reps = static_cast<std::size_t>(cfg.reps);
  RngStream root(cfg.seed, 0);
  std::size_t block = 0;
  for (ModelId model : cfg.models)
    for (double sigma : cfg.sigmas)
      for (std::size_t n : cfg.n_grid) {
        const RngStream base = root.substream(block++);
        // outcome: 1 reject, 0 accept, -1 failed
        std::vector<std::vector<int>> outcome(reps, std::vector<int>(per_sample, 0));
        std::vector<std::vector<std::string>> failure(reps, std::vector<std::string>(per_sample));
        parallel_for(reps, cfg.threads, [&](std::size_t r) {
          RngStream rng = base.substream(r);
          const RawSample raw = gen_model({model, sigma, n}, rng);
          std::size_t cell = 0;
          for (Hypothesis h : cfg.hypotheses)
            for (BootVariant v : cfg.variants)
              for (const Method& m : methods) {
                TestConfig tc;
                tc.method = m;
                tc.scheme = cfg.scheme;
                tc.variant = v;
                tc.B = cfg.B;
                tc.alpha = cfg.alpha;
                tc.seed = rng.substream(cell + 1).engine()();
                tc.eta = hypothesis_eta(h);
                try {
                  outcome[r][cell] = run_test(TestKind::predictor, raw, tc).reject ? 1 : 0;
                } catch (const Error& e) {
                  outcome[r][cell] = -1;
                  failure[r][cell] = e.what();
                }
                ++cell;
              }
        });

        std::size_t cell = 0;
        for (Hypothesis h : cfg.hypotheses)
          for (BootVariant v : cfg.variants) {
            McRow row{model, sigma, n, h, v, {}};
            for (std::size_t k = 0; k < methods.size(); ++k, ++cell) {
              int count = 0;
              int failed = 0;
              std::string first_failure;
              for (std::size_t r = 0; r < reps; ++r) {
                if (outcome[r][cell] < 0) {
                  if (failed++ == 0) first_failure = failure[r][cell];
                } else {
                  count += outcome[r][cell];
                }
              }
              if (failed > 0) {
                row.rejections.push_back(std::nullopt);
                out.diagnostics.push_back(to_string(model) + " sigma=" + std::to_string(sigma) +
                                          " n=" + std::to_string(n) + " " + to_string(h) + " " + methods[k].tag() +
                                          to_string(v) + ": " + std::to_string(failed) + " of " +
                                          std::to_string(reps) + " replications failed (" + first_failure + ")");
              } else {
                row.rejections.push_back(count);
              }
            }
            out.rows.push_back(std::move(row));
          }
      }
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace invreg
