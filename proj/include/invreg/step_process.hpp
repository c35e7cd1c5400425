#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "invreg/errors.hpp"

namespace invreg {

enum class Shape { vector, matrix };

inline std::string to_string(Shape s) { return s == Shape::vector ? "vector" : "matrix"; }

/// Breakpoints closer than this are treated as the same point; an evaluation
/// point this close above a breakpoint is read as sitting on it.
inline constexpr double kBreakpointTol = 1e-12;

/// Piecewise-constant function on [0,1] with values in R^{rows x cols}.
///
/// Piece k covers (b_{k-1}, b_k] with b_0 = 0 and the last breakpoint equal to
/// 1; the value at u = 0 is zero. Values are stored column-wise, one
/// column-major vec(value) per piece, so a piece can be viewed in place.
class StepProcess {
 public:
  using ConstPiece = Eigen::Map<const Eigen::MatrixXd>;

  StepProcess(Shape shape, Eigen::Index rows, Eigen::Index cols, std::vector<double> breakpoints,
              Eigen::MatrixXd values)
      : shape_(shape), rows_(rows), cols_(cols), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty()) throw ShapeError("step process needs at least one piece");
    if (values_.rows() != rows_ * cols_ || values_.cols() != static_cast<Eigen::Index>(breakpoints_.size()))
      throw ShapeError("value storage does not match shape and breakpoint count");
    if (shape_ == Shape::vector && cols_ != 1) throw ShapeError("vector process must have one column");
    double prev = 0.0;
    for (double b : breakpoints_) {
      if (!(b > prev)) throw ShapeError("breakpoints must be strictly increasing in (0,1]");
      prev = b;
    }
    if (breakpoints_.back() != 1.0) throw ShapeError("last breakpoint must equal 1");
  }

  static StepProcess zero(Shape shape, Eigen::Index rows, Eigen::Index cols) {
    return StepProcess(shape, rows, cols, {1.0}, Eigen::MatrixXd::Zero(rows * cols, 1));
  }

  Shape shape() const { return shape_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t pieces() const { return breakpoints_.size(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const Eigen::MatrixXd& values() const { return values_; }

  double lower(std::size_t k) const { return k == 0 ? 0.0 : breakpoints_[k - 1]; }
  double width(std::size_t k) const { return breakpoints_[k] - lower(k); }

  ConstPiece piece(std::size_t k) const {
    return ConstPiece(values_.col(static_cast<Eigen::Index>(k)).data(), rows_, cols_);
  }

  Eigen::MatrixXd zero_value() const { return Eigen::MatrixXd::Zero(rows_, cols_); }

  /// Index of the piece containing u in (0,1]; npos for the zero region.
  std::size_t locate(double u) const {
    if (u <= kBreakpointTol) return npos;
    auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), u);
    if (it == breakpoints_.end()) return breakpoints_.size() - 1;
    auto k = static_cast<std::size_t>(it - breakpoints_.begin());
    if (k > 0 && u - breakpoints_[k - 1] <= kBreakpointTol) --k;
    return k;
  }

  Eigen::MatrixXd evaluate(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("evaluation point must lie in [0,1]");
    return value_extended(u);
  }

  /// Zero below 0, proc(1) above 1.
  Eigen::MatrixXd value_extended(double x) const {
    if (x >= 1.0) return piece(pieces() - 1);
    const std::size_t k = locate(x);
    if (k == npos) return zero_value();
    return piece(k);
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Shape shape_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  std::vector<double> breakpoints_;
  Eigen::MatrixXd values_;
};

namespace detail {

/// Sorts and merges points closer than kBreakpointTol; keeps only (0,1) and
/// appends 1.
inline std::vector<double> normalize_grid(std::vector<double> pts) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  out.reserve(pts.size() + 1);
  for (double x : pts) {
    if (x <= kBreakpointTol || x >= 1.0 - kBreakpointTol) continue;
    if (!out.empty() && x - out.back() <= kBreakpointTol) continue;
    out.push_back(x);
  }
  out.push_back(1.0);
  return out;
}

}  // namespace detail

/// Builds sum_i summand_i * 1{u > entry_i} / n as a step process.
///
/// `summands` holds one vec(value) column per observation. Entries at or below
/// 0 are active everywhere on (0,1]; entries at or above 1 never are.
inline StepProcess entry_process(Shape shape, Eigen::Index rows, Eigen::Index cols, const Eigen::MatrixXd& summands,
                                 const std::vector<double>& entries, double n) {
  const std::size_t m = entries.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&entries](std::size_t a, std::size_t b) { return entries[a] < entries[b]; });

  std::vector<double> breaks;
  breaks.reserve(m + 1);
  Eigen::MatrixXd vals(rows * cols, static_cast<Eigen::Index>(m + 1));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows * cols);
  Eigen::Index written = 0;

  std::size_t pos = 0;
  while (pos < m && entries[order[pos]] <= kBreakpointTol) acc += summands.col(static_cast<Eigen::Index>(order[pos++]));
  while (pos < m && entries[order[pos]] < 1.0) {
    const double g = entries[order[pos]];
    if (g >= 1.0 - kBreakpointTol) {
      while (pos < m && entries[order[pos]] < 1.0) acc += summands.col(static_cast<Eigen::Index>(order[pos++]));
      break;
    }
    breaks.push_back(g);
    vals.col(written++) = acc / n;
    while (pos < m && entries[order[pos]] <= g + kBreakpointTol)
      acc += summands.col(static_cast<Eigen::Index>(order[pos++]));
  }
  breaks.push_back(1.0);
  vals.col(written++) = acc / n;
  return StepProcess(shape, rows, cols, std::move(breaks), vals.leftCols(written));
}

/// u -> proc(u + pi/2) - proc(u - pi/2), zero-extended below 0 and
/// constant-extended above 1.
inline StepProcess slice_diff(const StepProcess& proc, double pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("slice width must lie in [0,1]");
  if (pi == 0.0) return StepProcess::zero(proc.shape(), proc.rows(), proc.cols());
  const double half = pi / 2.0;
  std::vector<double> cand;
  cand.reserve(2 * proc.pieces() + 2);
  cand.push_back(half);
  cand.push_back(-half);
  for (double b : proc.breakpoints()) {
    cand.push_back(b - half);
    cand.push_back(b + half);
  }
  std::vector<double> grid = detail::normalize_grid(std::move(cand));
  Eigen::MatrixXd vals(proc.rows() * proc.cols(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::MatrixXd d = proc.value_extended(grid[j] + half) - proc.value_extended(grid[j] - half);
    vals.col(static_cast<Eigen::Index>(j)) = d.reshaped();
  }
  return StepProcess(proc.shape(), proc.rows(), proc.cols(), std::move(grid), std::move(vals));
}

/// Union of two breakpoint sets with the piece index of each operand.
struct MergedGrid {
  std::vector<double> breakpoints;
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

inline MergedGrid merge_grids(const StepProcess& a, const StepProcess& b) {
  std::vector<double> pts(a.breakpoints());
  pts.insert(pts.end(), b.breakpoints().begin(), b.breakpoints().end());
  MergedGrid g;
  g.breakpoints = detail::normalize_grid(std::move(pts));
  g.left.reserve(g.breakpoints.size());
  g.right.reserve(g.breakpoints.size());
  for (double s : g.breakpoints) {
    g.left.push_back(a.locate(s));
    g.right.push_back(b.locate(s));
  }
  return g;
}

/// u -> L * proc(u) for a fixed matrix L.
inline StepProcess left_multiply(const Eigen::MatrixXd& L, const StepProcess& proc) {
  if (L.cols() != proc.rows()) throw ShapeError("left factor does not match process rows");
  const Eigen::Index r = L.rows();
  Eigen::MatrixXd vals(r * proc.cols(), static_cast<Eigen::Index>(proc.pieces()));
  for (std::size_t k = 0; k < proc.pieces(); ++k)
    vals.col(static_cast<Eigen::Index>(k)) = (L * proc.piece(k)).reshaped();
  const Shape shape = proc.cols() == 1 ? Shape::vector : Shape::matrix;
  return StepProcess(shape, r, proc.cols(), proc.breakpoints(), std::move(vals));
}

inline nlohmann::json to_json(const StepProcess& proc) {
  nlohmann::json j;
  j["shape"] = to_string(proc.shape());
  j["rows"] = proc.rows();
  j["cols"] = proc.cols();
  j["breakpoints"] = proc.breakpoints();
  nlohmann::json vals = nlohmann::json::array();
  for (std::size_t k = 0; k < proc.pieces(); ++k) {
    const auto col = proc.values().col(static_cast<Eigen::Index>(k));
    vals.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  j["values"] = std::move(vals);
  return j;
}

inline StepProcess step_process_from_json(const nlohmann::json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  if (shape != "vector" && shape != "matrix") throw ShapeError("unknown process shape '" + shape + "'");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  auto breaks = j.at("breakpoints").get<std::vector<double>>();
  const auto& vals = j.at("values");
  if (vals.size() != breaks.size()) throw ShapeError("values and breakpoints differ in length");
  Eigen::MatrixXd v(rows * cols, static_cast<Eigen::Index>(breaks.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const auto col = vals[k].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(col.size()) != rows * cols) throw ShapeError("piece value has wrong size");
    v.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(col.data(), rows * cols);
  }
  return StepProcess(shape == "vector" ? Shape::vector : Shape::matrix, rows, cols, std::move(breaks), std::move(v));
}

}  // namespace invreg
