#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "invreg/bootstrap.hpp"
#include "invreg/core_data.hpp"
#include "invreg/empirical_process.hpp"
#include "invreg/errors.hpp"
#include "invreg/step_process.hpp"

namespace invreg {

/// Probability measure on [0,1]: Lebesgue, or equal mass on a finite grid.
struct Measure {
  enum class Kind { discrete_uniform, continuous_uniform };

  Kind kind = Kind::continuous_uniform;
  std::vector<double> grid;

  static Measure continuous_uniform() { return {}; }

  static Measure discrete_uniform(std::vector<double> grid) {
    if (grid.empty()) throw DomainError("discrete measure needs a non-empty grid");
    if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError("discrete measure grid must be sorted");
    if (grid.front() < 0.0 || grid.back() > 1.0) throw DomainError("discrete measure grid must lie in [0,1]");
    return {Kind::discrete_uniform, std::move(grid)};
  }

  /// Slice midpoints (2h-1)/(2H), h = 1..H.
  static Measure slice_midpoints(int H) {
    std::vector<double> g(static_cast<std::size_t>(H));
    for (int h = 1; h <= H; ++h) g[static_cast<std::size_t>(h - 1)] = (2.0 * h - 1.0) / (2.0 * H);
    return discrete_uniform(std::move(g));
  }

  /// Multiplies every mass by `scale`; statistics scale along with it.
  double mass_scale = 1.0;

  Measure scaled(double factor) const {
    Measure m = *this;
    m.mass_scale *= factor;
    return m;
  }
};

/// Mass that the measure gives to each piece of `proc`.
inline Eigen::VectorXd piece_masses(const StepProcess& proc, const Measure& nu) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(proc.pieces()));
  if (nu.kind == Measure::Kind::continuous_uniform) {
    for (std::size_t k = 0; k < proc.pieces(); ++k) w[static_cast<Eigen::Index>(k)] = proc.width(k);
  } else {
    const double mass = 1.0 / static_cast<double>(nu.grid.size());
    for (double g : nu.grid) {
      const std::size_t k = proc.locate(g);
      if (k != StepProcess::npos) w[static_cast<Eigen::Index>(k)] += mass;
    }
  }
  return w * nu.mass_scale;
}

/// Closed-form A = int mu(u) mu(u)^T dnu(u), summed piece by piece.
inline Eigen::MatrixXd integrate_outer_matrix(const StepProcess& proc, const Measure& nu) {
  const Eigen::VectorXd mass = piece_masses(proc, nu);
  const Eigen::Index p = proc.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  // mu mu^T = sum over columns c of mu_c mu_c^T
  for (Eigen::Index c = 0; c < proc.cols(); ++c) {
    const auto block = proc.values().middleRows(c * p, p);
    A.noalias() += block * mass.asDiagonal() * block.transpose();
  }
  return 0.5 * (A + A.transpose());
}

/// n * int |Q mu(u)|_F^2 dnu(u), summed piece by piece.
inline double cvm_statistic(const StepProcess& proc, const Measure& nu, const Eigen::MatrixXd& Q, std::size_t n) {
  if (Q.cols() != proc.rows()) throw ShapeError("projector does not match process dimension");
  const Eigen::VectorXd mass = piece_masses(proc, nu);
  double total = 0.0;
  for (std::size_t k = 0; k < proc.pieces(); ++k) {
    const double m = mass[static_cast<Eigen::Index>(k)];
    if (m == 0.0) continue;
    total += m * (Q * proc.piece(k)).squaredNorm();
  }
  return static_cast<double>(n) * total;
}

/// Inverse-regression method: which process is integrated against which measure.
struct Method {
  enum class Kind { sir, cume, sir2, cume2 };

  Kind kind = Kind::cume;
  int slices = 0;

  static Method sir(int H) { return {Kind::sir, H}; }
  static Method cume() { return {Kind::cume, 0}; }
  static Method sir2(int H) { return {Kind::sir2, H}; }
  static Method cume2() { return {Kind::cume2, 0}; }

  bool sliced() const { return kind == Kind::sir || kind == Kind::sir2; }
  bool second_order() const { return kind == Kind::sir2 || kind == Kind::cume2; }

  std::string tag() const {
    switch (kind) {
      case Kind::sir:
        return "SIR(" + std::to_string(slices) + ")";
      case Kind::sir2:
        return "SIR2(" + std::to_string(slices) + ")";
      case Kind::cume:
        return "CUME";
      case Kind::cume2:
        return "CUME2";
    }
    return "?";
  }

  /// Accepts "sir", "cume", "sir2", "cume2" (any case); H is required for the
  /// sliced ones and rejected otherwise.
  static Method parse(std::string name, std::optional<int> H) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    const bool sliced = name == "sir" || name == "sir2";
    if (!sliced && name != "cume" && name != "cume2") throw DomainError("unknown method '" + name + "'");
    if (sliced && !H) throw DomainError("method " + name + " needs a slice count H");
    if (!sliced && H) throw DomainError("method " + name + " takes no slice count");
    if (name == "sir") return sir(*H);
    if (name == "sir2") return sir2(*H);
    return name == "cume" ? cume() : cume2();
  }

  void validate(std::size_t n) const {
    if (sliced() && (slices < 2 || static_cast<std::size_t>(slices) > n))
      throw DomainError("slice count H must satisfy 2 <= H <= n");
  }

  Measure measure() const { return sliced() ? Measure::slice_midpoints(slices) : Measure::continuous_uniform(); }
};

/// The method's process mu-hat on a standardized sample.
inline StepProcess method_process(const StandardizedSample& s, const Method& m) {
  m.validate(s.n());
  StepProcess base = m.second_order() ? second_moment_rank(s) : first_moment_rank(s);
  return m.sliced() ? slice_diff(base, 1.0 / m.slices) : base;
}

/// Bootstrap counterpart of method_process under strategy b1 or b2.
inline StepProcess method_boot_process(const StandardizedSample& s, const BootstrapWeights& w, BootVariant v,
                                       const Method& m) {
  m.validate(s.n());
  StepProcess base = m.second_order() ? bootstrap_second_moment(s, w, v) : bootstrap_first_moment(s, w, v);
  return m.sliced() ? slice_diff(base, 1.0 / m.slices) : base;
}

/// Symmetric candidate matrix with its ordered eigendecomposition.
struct CandidateMatrix {
  Eigen::MatrixXd A;
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // columns, matching eigenvalues
  std::string method_tag;

  std::size_t p() const { return static_cast<std::size_t>(A.rows()); }

  static CandidateMatrix from_matrix(const Eigen::MatrixXd& A, std::string tag) {
    if (A.rows() != A.cols()) throw ShapeError("candidate matrix must be square");
    CandidateMatrix c;
    c.A = 0.5 * (A + A.transpose());
    c.method_tag = std::move(tag);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.A);
    const Eigen::Index p = c.A.rows();
    c.eigenvalues = eig.eigenvalues().reverse();
    c.eigenvectors = eig.eigenvectors().rowwise().reverse();
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < p; ++i) {
        const double x = c.eigenvectors(i, j);
        if (std::abs(x) > 1e-12) {
          if (x < 0.0) c.eigenvectors.col(j) *= -1.0;
          break;
        }
      }
    }
    return c;
  }
};

inline CandidateMatrix integrate_outer(const StepProcess& proc, const Measure& nu, std::string tag = "") {
  return CandidateMatrix::from_matrix(integrate_outer_matrix(proc, nu), std::move(tag));
}

inline CandidateMatrix method_matrix(const StandardizedSample& s, const Method& m) {
  return integrate_outer(method_process(s, m), m.measure(), m.tag());
}

/// SIR with H equal-count slices: mass 1/H on each slice midpoint.
inline CandidateMatrix sir_matrix(const StandardizedSample& s, int H) {
  if (H < 2 || static_cast<std::size_t>(H) > s.n()) throw DomainError("SIR needs 2 <= H <= n");
  return method_matrix(s, Method::sir(H));
}

inline CandidateMatrix cume_matrix(const StandardizedSample& s) { return method_matrix(s, Method::cume()); }

/// Second-moment candidate matrix; std::nullopt selects the cumulative variant,
/// otherwise the slice count.
inline CandidateMatrix order2_matrix(const StandardizedSample& s, std::optional<int> slices) {
  return method_matrix(s, slices ? Method::sir2(*slices) : Method::cume2());
}

struct EigenProjector {
  Eigen::MatrixXd Q;
  int rank = 0;
};

struct EigenBasis {
  Eigen::MatrixXd basis;  // p x d
  EigenProjector projector;
  bool eig_warning = false;  // lambda_d - lambda_{d+1} below 1e-10
};

/// Top-d eigenvectors and the eigenprojector on the p-d smallest eigenvalues.
inline EigenBasis eigen_basis(const CandidateMatrix& cm, int d) {
  const auto p = static_cast<int>(cm.p());
  if (d < 0 || d > p) throw DomainError("dimension d must satisfy 0 <= d <= p");
  EigenBasis out;
  out.basis = cm.eigenvectors.leftCols(d);
  out.projector.Q = Eigen::MatrixXd::Zero(p, p);
  for (int k = d; k < p; ++k) out.projector.Q.noalias() += cm.eigenvectors.col(k) * cm.eigenvectors.col(k).transpose();
  out.projector.rank = p - d;
  if (d > 0 && d < p) out.eig_warning = cm.eigenvalues[d - 1] - cm.eigenvalues[d] < 1e-10;
  return out;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json to_json(const CandidateMatrix& cm) {
  nlohmann::json j;
  j["method_tag"] = cm.method_tag;
  j["A"] = to_json(cm.A);
  j["eigenvalues"] = std::vector<double>(cm.eigenvalues.data(), cm.eigenvalues.data() + cm.eigenvalues.size());
  j["eigenvectors"] = to_json(cm.eigenvectors);
  return j;
}

}  // namespace invreg
