#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "invreg/core_data.hpp"
#include "invreg/empirical_process.hpp"
#include "invreg/rng.hpp"
#include "invreg/step_process.hpp"

namespace invreg {

/// b1 re-slices with the bootstrapped cdf; b2 keeps the original slicing.
enum class BootVariant { b1, b2 };

inline std::string to_string(BootVariant v) { return v == BootVariant::b1 ? "b1" : "b2"; }

/// Efron (multinomial) or Bayesian (normalized exponential) weights.
inline BootstrapWeights gen_weights(WeightScheme scheme, std::size_t n, RngStream& rng) {
  if (n < 1) throw DomainError("weights need n >= 1");
  BootstrapWeights out;
  out.scheme = scheme;
  out.seed = rng.master_seed() ^ rng.stream_id();
  out.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (scheme == WeightScheme::multinomial) {
    for (std::size_t k = 0; k < n; ++k) out.w[static_cast<Eigen::Index>(rng.index(n))] += 1.0;
  } else {
    for (std::size_t k = 0; k < n; ++k) out.w[static_cast<Eigen::Index>(k)] = rng.exponential();
    out.w *= static_cast<double>(n) / out.w.sum();
  }
  return out;
}

inline constexpr int kMaxWeightRetries = 100;

/// Draws weights and whitens with the weighted moments, redrawing from the
/// same stream whenever the weighted covariance is singular.
inline std::pair<BootstrapWeights, StandardizedSample> draw_weighted_sample(const RawSample& raw, WeightScheme scheme,
                                                                            RngStream& rng,
                                                                            int max_retries = kMaxWeightRetries,
                                                                            int* redraws = nullptr) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    BootstrapWeights w = gen_weights(scheme, raw.n(), rng);
    if (redraws != nullptr) *redraws = attempt;
    try {
      StandardizedSample s = weighted_standardize(raw, w);
      return {std::move(w), std::move(s)};
    } catch (const SingularCovariance&) {
    }
  }
  throw BootstrapAbort("weighted covariance singular in " + std::to_string(max_retries) + " consecutive weight draws");
}

namespace detail {

/// Entry points F*(Y_i) - w_i/n, i.e. the weighted mass strictly below i in
/// (Y, index) order. Zero-weight observations get entry 1 (never active).
inline std::vector<double> weighted_rank_entries(const Eigen::VectorXd& Y, const Eigen::VectorXd& w) {
  const std::vector<std::size_t> order = rank_order(Y);
  const double n = static_cast<double>(order.size());
  std::vector<double> entries(order.size());
  double below = 0.0;
  for (std::size_t idx : order) {
    const double wi = w[static_cast<Eigen::Index>(idx)];
    entries[idx] = wi > 0.0 ? std::min(std::max(below / n, 0.0), 1.0) : 1.0;
    below += wi;
  }
  return entries;
}

inline void check_weights(const StandardizedSample& s, const BootstrapWeights& w) {
  if (w.size() != s.n()) throw DimensionMismatch("weight vector length differs from sample size");
}

}  // namespace detail

/// u -> n^{-1} sum_i w_i Z_i 1{F*(Y_i) < u + w_i/n}.
inline StepProcess bootstrap_first_moment_b1(const StandardizedSample& s, const BootstrapWeights& w) {
  detail::check_weights(s, w);
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::vector, p, 1, detail::first_moment_summands(s.Z, &w.w),
                       detail::weighted_rank_entries(s.Y, w.w), static_cast<double>(s.n()));
}

/// u -> n^{-1} sum_i w_i Z_i 1{F(Y_i) < u + 1/n}.
inline StepProcess bootstrap_first_moment_b2(const StandardizedSample& s, const BootstrapWeights& w) {
  detail::check_weights(s, w);
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::vector, p, 1, detail::first_moment_summands(s.Z, &w.w), detail::rank_entries(s.Y),
                       static_cast<double>(s.n()));
}

inline StepProcess bootstrap_second_moment_b1(const StandardizedSample& s, const BootstrapWeights& w) {
  detail::check_weights(s, w);
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::matrix, p, p, detail::second_moment_summands(s.Z, &w.w),
                       detail::weighted_rank_entries(s.Y, w.w), static_cast<double>(s.n()));
}

inline StepProcess bootstrap_second_moment_b2(const StandardizedSample& s, const BootstrapWeights& w) {
  detail::check_weights(s, w);
  const auto p = static_cast<Eigen::Index>(s.p());
  return entry_process(Shape::matrix, p, p, detail::second_moment_summands(s.Z, &w.w), detail::rank_entries(s.Y),
                       static_cast<double>(s.n()));
}

inline StepProcess bootstrap_first_moment(const StandardizedSample& s, const BootstrapWeights& w, BootVariant v) {
  return v == BootVariant::b1 ? bootstrap_first_moment_b1(s, w) : bootstrap_first_moment_b2(s, w);
}

inline StepProcess bootstrap_second_moment(const StandardizedSample& s, const BootstrapWeights& w, BootVariant v) {
  return v == BootVariant::b1 ? bootstrap_second_moment_b1(s, w) : bootstrap_second_moment_b2(s, w);
}

}  // namespace invreg
