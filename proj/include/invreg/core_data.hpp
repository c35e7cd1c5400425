#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invreg/errors.hpp"

namespace invreg {

enum class WeightScheme { multinomial, bayesian };

inline std::string to_string(WeightScheme s) { return s == WeightScheme::multinomial ? "multinomial" : "bayesian"; }

/// Nonnegative exchangeable weights summing to n.
struct BootstrapWeights {
  Eigen::VectorXd w;
  WeightScheme scheme = WeightScheme::multinomial;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(w.size()); }

  static BootstrapWeights unit(std::size_t n) {
    return {Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), WeightScheme::multinomial, 0};
  }
};

struct RawSample {
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd Y;  // n

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }

  void validate() const {
    if (X.rows() != Y.size())
      throw DimensionMismatch("X has " + std::to_string(X.rows()) + " rows but Y has " + std::to_string(Y.size()) +
                              " entries");
    if (X.rows() < 2) throw DomainError("need at least 2 observations");
    if (X.cols() < 1) throw DomainError("need at least 1 predictor");
    if (!X.allFinite() || !Y.allFinite()) throw DomainError("sample contains non-finite values");
  }
};

/// Whitened predictors Z = (X - mean) * root_inv_cov, with the moments used.
struct StandardizedSample {
  Eigen::MatrixXd Z;
  Eigen::VectorXd Y;
  Eigen::VectorXd mean;
  Eigen::MatrixXd root_inv_cov;  // Sigma^{-1/2}
  Eigen::MatrixXd root_cov;      // Sigma^{1/2}
  std::optional<BootstrapWeights> weights_used;

  std::size_t n() const { return static_cast<std::size_t>(Z.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(Z.cols()); }
};

namespace detail {

inline constexpr double kSingularFloor = 1e-12;

struct RootPair {
  Eigen::MatrixXd inv_sqrt;
  Eigen::MatrixXd sqrt;
};

inline RootPair symmetric_roots(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0) || lambda.minCoeff() <= kSingularFloor * lmax)
    throw SingularCovariance("covariance is singular: eigenvalue ratio " +
                             std::to_string(lmax > 0.0 ? lambda.minCoeff() / lmax : 0.0));
  const Eigen::MatrixXd& V = eig.eigenvectors();
  RootPair r;
  r.inv_sqrt = V * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  r.sqrt = V * lambda.cwiseSqrt().asDiagonal() * V.transpose();
  // exact symmetry
  r.inv_sqrt = 0.5 * (r.inv_sqrt + r.inv_sqrt.transpose()).eval();
  r.sqrt = 0.5 * (r.sqrt + r.sqrt.transpose()).eval();
  return r;
}

inline StandardizedSample whiten(const RawSample& raw, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  RootPair roots = symmetric_roots(cov);
  StandardizedSample s;
  s.Z = (raw.X.rowwise() - mean.transpose()) * roots.inv_sqrt;
  s.Y = raw.Y;
  s.mean = mean;
  s.root_inv_cov = std::move(roots.inv_sqrt);
  s.root_cov = std::move(roots.sqrt);
  return s;
}

}  // namespace detail

/// Whitens X with its 1/n-normalized sample covariance.
inline StandardizedSample standardize(const RawSample& raw) {
  raw.validate();
  const double n = static_cast<double>(raw.n());
  const Eigen::VectorXd mean = raw.X.colwise().mean();
  const Eigen::MatrixXd centered = raw.X.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / n;
  return detail::whiten(raw, mean, cov);
}

/// Whitens X with supplied (population) moments instead of estimated ones.
inline StandardizedSample standardize_known(const RawSample& raw, const Eigen::VectorXd& mean,
                                            const Eigen::MatrixXd& cov) {
  raw.validate();
  if (mean.size() != raw.X.cols() || cov.rows() != raw.X.cols() || cov.cols() != raw.X.cols())
    throw DimensionMismatch("moment dimensions do not match the number of predictors");
  return detail::whiten(raw, mean, cov);
}

/// Bootstrap whitening: mean and covariance are the w-weighted moments, both
/// normalized by n (the weights sum to n).
inline StandardizedSample weighted_standardize(const RawSample& raw, const BootstrapWeights& weights) {
  raw.validate();
  if (weights.size() != raw.n()) throw DimensionMismatch("weight vector length differs from sample size");
  const double n = static_cast<double>(raw.n());
  const Eigen::VectorXd& w = weights.w;
  const Eigen::VectorXd mean = (raw.X.transpose() * w) / n;
  const Eigen::MatrixXd centered = raw.X.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * w.asDiagonal() * centered) / n;
  StandardizedSample s = detail::whiten(raw, mean, cov);
  s.weights_used = weights;
  return s;
}

/// Right-continuous empirical cdf with 1/n jumps.
class StepCdf {
 public:
  explicit StepCdf(std::vector<double> sorted_values) : sorted_(std::move(sorted_values)) {}

  std::size_t n() const { return sorted_.size(); }
  const std::vector<double>& sorted_values() const { return sorted_; }

  double operator()(double t) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size());
  }

 private:
  std::vector<double> sorted_;
};

inline StepCdf empirical_cdf(const Eigen::VectorXd& Y) {
  if (Y.size() < 1) throw DomainError("empirical cdf needs at least one value");
  if (!Y.allFinite()) throw DomainError("responses must be finite");
  std::vector<double> v(Y.data(), Y.data() + Y.size());
  std::sort(v.begin(), v.end());
  return StepCdf(std::move(v));
}

/// Observation indices sorted by (Y_i, i) lexicographically.
inline std::vector<std::size_t> rank_order(const Eigen::VectorXd& Y) {
  std::vector<std::size_t> order(static_cast<std::size_t>(Y.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&Y](std::size_t a, std::size_t b) {
    return Y[static_cast<Eigen::Index>(a)] < Y[static_cast<Eigen::Index>(b)];
  });
  return order;
}

struct RankResult {
  std::vector<std::size_t> rank;  // 1-based
  bool ties = false;
};

/// rank_i = n * F(Y_i) for distinct responses; tied responses are ranked by
/// original index and flagged.
inline RankResult ranks(const Eigen::VectorXd& Y) {
  if (!Y.allFinite()) throw DomainError("responses must be finite");
  const std::vector<std::size_t> order = rank_order(Y);
  RankResult r;
  r.rank.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    r.rank[order[k]] = k + 1;
    if (k > 0 && Y[static_cast<Eigen::Index>(order[k])] == Y[static_cast<Eigen::Index>(order[k - 1])]) r.ties = true;
  }
  return r;
}

inline bool has_ties(const Eigen::VectorXd& Y) { return ranks(Y).ties; }

/// inf{t : F(t) >= u}; u = 0 gives -infinity.
inline double generalized_inverse(const StepCdf& cdf, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  if (u == 0.0) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(cdf.n());
  // n*u is an integer up to rounding when u sits on the 1/n grid
  auto k = static_cast<std::size_t>(std::ceil(n * u - 1e-9));
  k = std::clamp<std::size_t>(k, 1, cdf.n());
  return cdf.sorted_values()[k - 1];
}

}  // namespace invreg
