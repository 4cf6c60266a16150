#pragma once

#include "kernel.hpp"
#include "parallel.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace betakde {

//! Observations X_1, ..., X_n, each in [0, 1].
class Sample
{
public:
  explicit Sample(std::vector<double> points)
    : points_(std::move(points))
  {
    if (points_.empty())
      throw std::invalid_argument("Sample: at least one point is required");
    for (double x : points_)
      detail::require(x >= 0.0 && x <= 1.0, "Sample: points must lie in [0, 1]");
  }

  std::size_t n() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }

private:
  std::vector<double> points_;
};

//! The beta kernel density estimator f_b(t) = (1/n) sum_k K_{t,b}(X_k).
//!
//! Evaluation is exact summation over the sample. log X_k and log(1 - X_k)
//! are cached at construction so a node costs one vectorised exp per point.
class EstimatorFit
{
public:
  EstimatorFit(Sample sample, double b)
    : sample_(std::move(sample))
    , b_(b)
  {
    detail::require(b > 0.0 && b < 1.0, "EstimatorFit: b must lie in (0, 1)");
    const auto& pts = sample_.points();
    const auto n = static_cast<Eigen::Index>(pts.size());
    log_x_.resize(n);
    log_1mx_.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      // finite stand-in for log 0: 0 * it stays 0, positive multiples underflow
      log_x_[k] = pts[k] > 0.0 ? std::log(pts[k]) : log_zero;
      log_1mx_[k] = pts[k] < 1.0 ? std::log1p(-pts[k]) : log_zero;
    }
  }

  const Sample& sample() const { return sample_; }
  double b() const { return b_; }
  std::size_t n() const { return sample_.n(); }

  double operator()(double t) const
  {
    const BetaKernel k(t, b_); // validates t
    const double a = t / b_;
    const double c = (1.0 - t) / b_;
    const double shift = k.log_normalizer();
    const auto z = a * log_x_ + c * log_1mx_ - shift;
    const double total = (z < underflow).select(0.0, z.exp()).sum();
    return total / static_cast<double>(sample_.n());
  }

private:
  static constexpr double log_zero = -1e300;
  static constexpr double underflow = -708.0;

  Sample sample_;
  double b_;
  Eigen::ArrayXd log_x_;
  Eigen::ArrayXd log_1mx_;
};

inline EstimatorFit fit(Sample sample, double b)
{
  return EstimatorFit(std::move(sample), b);
}

inline double evaluate(const EstimatorFit& est, double t)
{
  return est(t);
}

//! Pointwise evaluation at every node of a sorted grid in [0, 1].
//! Nodes are distributed over workers; each node is computed exactly as
//! evaluate() would, so results do not depend on the worker count.
inline std::vector<double> evaluate_grid(const EstimatorFit& est,
                                         std::span<const double> grid,
                                         unsigned workers = 0)
{
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::require(grid[i] >= 0.0 && grid[i] <= 1.0,
                    "evaluate_grid: nodes must lie in [0, 1]");
    if (i > 0 && grid[i] < grid[i - 1])
      throw std::invalid_argument("evaluate_grid: grid must be sorted");
  }
  std::vector<double> out(grid.size());
  parallel_for(
    grid.size(), [&](std::size_t i) { out[i] = est(grid[i]); }, workers);
  return out;
}

//! b_n = c n^{-2/(2 beta + 1)}; the result must fall in (0, 1).
inline double theoretical_bandwidth(std::size_t n, double beta, double c = 1.0)
{
  detail::require(n >= 1, "theoretical_bandwidth: n must be >= 1");
  detail::require(beta > 0.0 && c > 0.0,
                  "theoretical_bandwidth: beta and c must be positive");
  const double b =
    c * std::pow(static_cast<double>(n), -2.0 / (2.0 * beta + 1.0));
  if (!(b > 0.0 && b < 1.0))
    throw std::domain_error(
      "theoretical_bandwidth: c n^(-2/(2 beta + 1)) is not in (0, 1)");
  return b;
}

} // namespace betakde
