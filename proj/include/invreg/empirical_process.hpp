#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "invreg/core_data.hpp"
#include "invreg/step_process.hpp"

namespace invreg {

/// Quantile function u -> Phi^-(u) of a continuous reference law for Y.
using QuantileFn = std::function<double(double)>;

namespace detail {

/// One column per observation: Z_i for first moments, vec(Z_i Z_i^T - I) for
/// second moments, each scaled by weights[i].
inline Eigen::MatrixXd first_moment_summands(const Eigen::MatrixXd& Z, const Eigen::VectorXd* weights = nullptr) {
  Eigen::MatrixXd out = Z.transpose();
  if (weights != nullptr) out = out * weights->asDiagonal();
  return out;
}

inline Eigen::MatrixXd second_moment_summands(const Eigen::MatrixXd& Z, const Eigen::VectorXd* weights = nullptr) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index p = Z.cols();
  Eigen::MatrixXd out(p * p, n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd z = Z.row(i).transpose();
    Eigen::MatrixXd m = z * z.transpose() - I;
    if (weights != nullptr) m *= (*weights)[i];
    out.col(i) = m.reshaped();
  }
  return out;
}

/// Entry points (rank_i - 1)/n: observation i is active on u > entry_i, which
/// is the strict form of 1{F(Y_i) < u + 1/n}.
inline std::vector<double> rank_entries(const Eigen::VectorXd& Y) {
  const std::vector<std::size_t> order = rank_order(Y);
  const double n = static_cast<double>(order.size());
  std::vector<double> entries(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) entries[order[k]] = static_cast<double>(k) / n;
  return entries;
}

/// entry_i = inf{u in [0,1] : Y_i <= Phi^-(u)}, located by bisection on
/// threshold comparisons only. Observations never selected get entry 1.
inline std::vector<double> quantile_entries(const Eigen::VectorXd& Y, const QuantileFn& phi_inverse) {
  std::vector<double> entries(static_cast<std::size_t>(Y.size()));
  for (Eigen::Index i = 0; i < Y.size(); ++i) {
    const double y = Y[i];
    if (!(y <= phi_inverse(1.0))) {
      entries[static_cast<std::size_t>(i)] = 1.0;
      continue;
    }
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 64 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (y <= phi_inverse(mid))
        hi = mid;
      else
        lo = mid;
    }
    entries[static_cast<std::size_t>(i)] = hi;
  }
  return entries;
}

}  // namespace detail

/// u -> n^{-1} sum_i Z_i 1{Y_i <= Phi^-(u)} for a known continuous Phi.
///
/// At an entry point itself the process takes its left limit; for continuous
/// Phi this is a null set.
inline StepProcess first_moment_known_phi(const StandardizedSample& s, const QuantileFn& phi_inverse) {
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::vector, p, 1, detail::first_moment_summands(s.Z),
                       detail::quantile_entries(s.Y, phi_inverse), static_cast<double>(s.n()));
}

inline StepProcess second_moment_known_phi(const StandardizedSample& s, const QuantileFn& phi_inverse) {
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::matrix, p, p, detail::second_moment_summands(s.Z),
                       detail::quantile_entries(s.Y, phi_inverse), static_cast<double>(s.n()));
}

/// Same process for a known continuous cdf Phi: entry_i = Phi(Y_i).
inline StepProcess first_moment_known_cdf(const StandardizedSample& s, const std::function<double(double)>& cdf) {
  const auto p = static_cast<Eigen::Index>(s.p());
  std::vector<double> entries(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) entries[i] = cdf(s.Y[static_cast<Eigen::Index>(i)]);
  return entry_process(Shape::vector, p, 1, detail::first_moment_summands(s.Z), entries, static_cast<double>(s.n()));
}

/// Rank-based first-moment process: S_k / n on ((k-1)/n, k/n], with S_k the
/// cumulative sum of Z in increasing order of Y.
inline StepProcess first_moment_rank(const StandardizedSample& s) {
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::vector, p, 1, detail::first_moment_summands(s.Z), detail::rank_entries(s.Y),
                       static_cast<double>(s.n()));
}

/// Rank-based second-moment process with summands Z_i Z_i^T - I.
inline StepProcess second_moment_rank(const StandardizedSample& s) {
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::matrix, p, p, detail::second_moment_summands(s.Z), detail::rank_entries(s.Y),
                       static_cast<double>(s.n()));
}

}  // namespace invreg
