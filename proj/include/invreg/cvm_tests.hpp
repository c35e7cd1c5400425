#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invreg/bootstrap.hpp"
#include "invreg/candidate_matrix.hpp"
#include "invreg/core_data.hpp"
#include "invreg/errors.hpp"
#include "invreg/parallel.hpp"
#include "invreg/rng.hpp"
#include "invreg/step_process.hpp"

namespace invreg {

/// Which Cramer-von Mises hypothesis is tested.
enum class TestKind {
  dimension = 1,  // d0 = d against d0 > d
  predictor = 2,  // eta^T X has no effect on Y
  method = 3,     // the estimated basis misses no direction
};

inline std::string to_string(TestKind k) {
  switch (k) {
    case TestKind::dimension:
      return "dimension";
    case TestKind::predictor:
      return "predictor";
    case TestKind::method:
      return "method";
  }
  return "?";
}

// -- statistics ---------------------------------------------------------------

/// Orthonormal basis of span(M); throws RankError when M is rank-deficient.
inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& M) {
  if (M.cols() == 0) return Eigen::MatrixXd(M.rows(), 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  qr.setThreshold(1e-10);
  if (qr.rank() < M.cols()) throw RankError("direction matrix is rank-deficient");
  return qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
}

/// Columns completing an orthonormal basis to an orthogonal matrix.
inline Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& basis) {
  const Eigen::Index p = basis.rows();
  const Eigen::Index d = basis.cols();
  if (d == 0) return Eigen::MatrixXd::Identity(p, p);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  return full.rightCols(p - d);
}

inline Eigen::MatrixXd projector_onto(const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd U = orthonormal_basis(M);
  return U * U.transpose();
}

/// Projector onto span(Sigma^{-1/2} eta), the whitened image of eta.
inline Eigen::MatrixXd predictor_projector(const StandardizedSample& s, const Eigen::MatrixXd& eta) {
  if (eta.rows() != static_cast<Eigen::Index>(s.p())) throw DimensionMismatch("eta must have p rows");
  return projector_onto(s.root_inv_cov * eta);
}

/// Whitened image Sigma^{1/2} beta of a basis given in X coordinates.
inline Eigen::MatrixXd whitened_basis(const StandardizedSample& s, const Eigen::MatrixXd& beta) {
  if (beta.rows() != static_cast<Eigen::Index>(s.p())) throw DimensionMismatch("beta must have p rows");
  return orthonormal_basis(s.root_cov * beta);
}

/// n * (sum of the p-d smallest eigenvalues of A_nu(mu)).
inline double lambda1(const StepProcess& proc, const Measure& nu, int d, std::size_t n) {
  const auto p = static_cast<int>(proc.rows());
  if (d < 0 || d >= p) throw DomainError("dimension test needs 0 <= d < p");
  const CandidateMatrix cm = integrate_outer(proc, nu);
  return static_cast<double>(n) * cm.eigenvalues.tail(p - d).sum();
}

/// n * int |Q_eta mu(u)|_F^2 dnu(u).
inline double lambda2(const StepProcess& proc, const Measure& nu, const Eigen::MatrixXd& eta,
                      const StandardizedSample& s) {
  return cvm_statistic(proc, nu, predictor_projector(s, eta), s.n());
}

/// n * int |eta_hat^T mu(u)|_F^2 dnu(u), eta_hat completing beta_hat.
inline double lambda3(const StepProcess& proc, const Measure& nu, const Eigen::MatrixXd& beta_hat, std::size_t n) {
  const Eigen::Index d = beta_hat.cols();
  if ((beta_hat.transpose() * beta_hat - Eigen::MatrixXd::Identity(d, d)).norm() > 1e-8)
    throw OrthoError("beta_hat must have orthonormal columns");
  const Eigen::MatrixXd eta_hat = orthonormal_complement(beta_hat);
  return cvm_statistic(proc, nu, eta_hat.transpose(), n);
}

/// u -> (I - Q) mu(u) + (mu*(u) - mu(u)) on the merged breakpoint grid.
inline StepProcess constrained_boot_process(const StepProcess& mu_hat, const StepProcess& mu_star,
                                            const Eigen::MatrixXd& Q) {
  if (mu_hat.rows() != mu_star.rows() || mu_hat.cols() != mu_star.cols() || mu_hat.shape() != mu_star.shape())
    throw ShapeError("original and bootstrap processes differ in shape");
  if (Q.rows() != mu_hat.rows() || Q.cols() != mu_hat.rows()) throw ShapeError("projector does not match process");
  const MergedGrid g = merge_grids(mu_hat, mu_star);
  const Eigen::MatrixXd I_minus_Q = Eigen::MatrixXd::Identity(Q.rows(), Q.cols()) - Q;
  Eigen::MatrixXd vals(mu_hat.rows() * mu_hat.cols(), static_cast<Eigen::Index>(g.breakpoints.size()));
  for (std::size_t j = 0; j < g.breakpoints.size(); ++j) {
    const Eigen::MatrixXd a = g.left[j] == StepProcess::npos ? mu_hat.zero_value() : Eigen::MatrixXd(mu_hat.piece(g.left[j]));
    const Eigen::MatrixXd b =
        g.right[j] == StepProcess::npos ? mu_star.zero_value() : Eigen::MatrixXd(mu_star.piece(g.right[j]));
    vals.col(static_cast<Eigen::Index>(j)) = (I_minus_Q * a + (b - a)).reshaped();
  }
  return StepProcess(mu_hat.shape(), mu_hat.rows(), mu_hat.cols(), g.breakpoints, std::move(vals));
}

inline StepProcess constrained_boot_process(const StepProcess& mu_hat, const StepProcess& mu_star,
                                            const EigenProjector& Q) {
  return constrained_boot_process(mu_hat, mu_star, Q.Q);
}

// -- test driver --------------------------------------------------------------

struct TestConfig {
  Method method = Method::cume();  // process mu-hat and its measure
  WeightScheme scheme = WeightScheme::multinomial;
  BootVariant variant = BootVariant::b1;
  int B = 199;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// Whiten each bootstrap sample with its weighted moments. Turning this off
  /// reuses the original whitening (known-moment experiments only).
  bool bootstrap_standardization = true;
  /// Scales the measure; statistics and p-values are checked against it.
  double measure_scale = 1.0;

  int d = 0;                           // dimension and method tests
  Eigen::MatrixXd eta;                 // predictor test, p x (p-d), X coordinates
  std::optional<Method> basis_method;  // method test: basis re-estimated by this method
  Eigen::MatrixXd beta;                // method test with a fixed basis, X coordinates

  void validate() const {
    if (B < 1) throw DomainError("bootstrap replicate count B must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (!(measure_scale > 0.0)) throw DomainError("measure scale must be positive");
  }
};

struct TestReport {
  TestKind kind = TestKind::dimension;
  double statistic = 0.0;
  std::vector<double> boot_stats;
  double p_value = 1.0;
  bool reject = false;
  TestConfig config;
  std::size_t n = 0;
  std::size_t p = 0;
  int weight_redraws = 0;
  std::vector<std::string> warnings;
};

/// (1 + #{b : boot_b >= statistic}) / (B + 1).
inline double bootstrap_p_value(double statistic, const std::vector<double>& boot) {
  std::size_t count = 0;
  for (double b : boot)
    if (b >= statistic) ++count;
  return (1.0 + static_cast<double>(count)) / (static_cast<double>(boot.size()) + 1.0);
}

/// Original-sample quantities of one test, shared by all bootstrap replicates.
class CvmTest {
 public:
  CvmTest(TestKind kind, const RawSample& raw, TestConfig config)
      : kind_(kind), raw_(raw), config_(std::move(config)), sample_(standardize(raw_)) {
    config_.validate();
    const std::size_t p = sample_.p();
    nu_ = config_.method.measure().scaled(config_.measure_scale);
    mu_hat_ = method_process(sample_, config_.method);
    if (ranks(sample_.Y).ties) warnings_.push_back("ties in the response were ranked by observation index");

    switch (kind_) {
      case TestKind::dimension: {
        if (config_.d < 0 || static_cast<std::size_t>(config_.d) >= p)
          throw DomainError("dimension test needs 0 <= d < p");
        const EigenBasis eb = eigen_basis(integrate_outer(*mu_hat_, nu_), config_.d);
        if (eb.eig_warning) warnings_.push_back("eigenvalue gap at d is below 1e-10");
        Q_ = eb.projector.Q;
        break;
      }
      case TestKind::predictor:
        if (config_.eta.cols() == 0) throw DomainError("predictor test needs eta");
        Q_ = predictor_projector(sample_, config_.eta);
        break;
      case TestKind::method: {
        const Eigen::MatrixXd beta_hat = method_basis(sample_, nullptr);
        Q_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) -
             beta_hat * beta_hat.transpose();
        break;
      }
    }
    statistic_ = kind_ == TestKind::dimension ? lambda1(*mu_hat_, nu_, config_.d, sample_.n())
                                              : cvm_statistic(*mu_hat_, nu_, Q_, sample_.n());
  }

  double statistic() const { return statistic_; }
  const Eigen::MatrixXd& projector() const { return Q_; }
  const StepProcess& process() const { return *mu_hat_; }
  const StandardizedSample& sample() const { return sample_; }
  const Measure& measure() const { return nu_; }

  struct Replicate {
    double statistic = 0.0;
    int redraws = 0;
  };

  /// Bootstrap statistic for weights drawn from `rng`.
  Replicate replicate(RngStream& rng) const {
    Replicate out;
    BootstrapWeights w;
    StandardizedSample s_star;
    if (config_.bootstrap_standardization) {
      auto drawn = draw_weighted_sample(raw_, config_.scheme, rng, kMaxWeightRetries, &out.redraws);
      w = std::move(drawn.first);
      s_star = std::move(drawn.second);
    } else {
      w = gen_weights(config_.scheme, raw_.n(), rng);
      s_star = sample_;
    }
    const StepProcess mu_star = method_boot_process(s_star, w, config_.variant, config_.method);
    const StepProcess mu_k = constrained_boot_process(*mu_hat_, mu_star, Q_);
    const std::size_t n = sample_.n();
    switch (kind_) {
      case TestKind::dimension:
        out.statistic = lambda1(mu_k, nu_, config_.d, n);
        break;
      case TestKind::predictor:
        out.statistic = cvm_statistic(mu_k, nu_, predictor_projector(s_star, config_.eta), n);
        break;
      case TestKind::method: {
        const Eigen::MatrixXd beta_star = method_basis(s_star, &w);
        const auto p = static_cast<Eigen::Index>(sample_.p());
        const Eigen::MatrixXd Q_star = Eigen::MatrixXd::Identity(p, p) - beta_star * beta_star.transpose();
        out.statistic = cvm_statistic(mu_k, nu_, Q_star, n);
        break;
      }
    }
    return out;
  }

  TestReport run() const {
    TestReport report;
    report.kind = kind_;
    report.statistic = statistic_;
    report.config = config_;
    report.n = sample_.n();
    report.p = sample_.p();
    report.warnings = warnings_;
    const auto B = static_cast<std::size_t>(config_.B);
    std::vector<Replicate> reps(B);
    parallel_for(B, config_.threads, [&](std::size_t b) {
      RngStream rng(config_.seed, b);
      reps[b] = replicate(rng);
    });
    report.boot_stats.reserve(B);
    for (const Replicate& r : reps) {
      report.boot_stats.push_back(r.statistic);
      report.weight_redraws += r.redraws;
    }
    if (report.weight_redraws > 0)
      report.warnings.push_back("singular weighted covariance: " + std::to_string(report.weight_redraws) +
                                " weight vectors redrawn");
    report.p_value = bootstrap_p_value(report.statistic, report.boot_stats);
    report.reject = report.p_value <= config_.alpha;
    return report;
  }

 private:
  /// Basis for the method test: re-estimated by basis_method (original sample
  /// when w is null, its b-variant bootstrap otherwise) or the fixed beta.
  Eigen::MatrixXd method_basis(const StandardizedSample& s, const BootstrapWeights* w) const {
    const auto p = static_cast<int>(s.p());
    if (config_.d < 0 || config_.d > p) throw DomainError("method test needs 0 <= d <= p");
    if (config_.basis_method) {
      const Method& m = *config_.basis_method;
      const StepProcess proc = w == nullptr ? method_process(s, m) : method_boot_process(s, *w, config_.variant, m);
      return eigen_basis(integrate_outer(proc, m.measure()), config_.d).basis;
    }
    if (config_.beta.cols() != config_.d)
      throw DomainError("method test needs a basis method or a fixed basis with d columns");
    if (config_.d == 0) return Eigen::MatrixXd(p, 0);
    return whitened_basis(s, config_.beta);
  }

  TestKind kind_;
  const RawSample& raw_;
  TestConfig config_;
  StandardizedSample sample_;
  Measure nu_;
  std::optional<StepProcess> mu_hat_;
  Eigen::MatrixXd Q_;
  double statistic_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Statistic, B constrained-bootstrap replicates and the resulting p-value.
inline TestReport run_test(TestKind kind, const RawSample& raw, const TestConfig& config) {
  raw.validate();
  return CvmTest(kind, raw, config).run();
}

struct DimensionEstimate {
  int d = 0;
  std::vector<TestReport> tests;  // one per d tried, in order
};

/// Sequential dimension tests from d = 0 up to the first acceptance.
inline DimensionEstimate estimate_dimension(const RawSample& raw, const TestConfig& config) {
  raw.validate();
  DimensionEstimate out;
  const auto p = static_cast<int>(raw.p());
  for (int d = 0; d < p; ++d) {
    TestConfig c = config;
    c.d = d;
    c.seed = detail::splitmix64(config.seed + static_cast<std::uint64_t>(d));
    out.tests.push_back(run_test(TestKind::dimension, raw, c));
    if (!out.tests.back().reject) {
      out.d = d;
      return out;
    }
  }
  out.d = p;
  return out;
}

}  // namespace invreg
