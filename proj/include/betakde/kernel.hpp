#pragma once

#include "specfun.hpp"

#include <cmath>
#include <numbers>

namespace betakde {

//! The beta kernel K_{t,b}: the Beta(t/b + 1, (1 - t)/b + 1) density.
//!
//! t is the evaluation point (and the mode of the kernel), b the bandwidth.
//! All arithmetic happens in log domain; shapes reach 1/b + 1.
class BetaKernel
{
public:
  BetaKernel(double t, double b)
    : t_(t)
    , b_(b)
  {
    detail::require(t >= 0.0 && t <= 1.0, "BetaKernel: t must lie in [0, 1]");
    detail::require(b > 0.0 && b < 1.0, "BetaKernel: b must lie in (0, 1)");
    log_norm_ = log_beta(alpha(), beta_shape());
  }

  double t() const { return t_; }
  double b() const { return b_; }
  double alpha() const { return t_ / b_ + 1.0; }
  double beta_shape() const { return (1.0 - t_) / b_ + 1.0; }
  BetaParams params() const { return { alpha(), beta_shape() }; }

  //! log B(alpha, beta_shape), cached at construction.
  double log_normalizer() const { return log_norm_; }

  //! log K_{t,b}(x); -inf at an endpoint whose exponent is positive.
  double log_evaluate(double x) const
  {
    detail::require(x >= 0.0 && x <= 1.0, "BetaKernel: x must lie in [0, 1]");
    return detail::xlogy(t_ / b_, x) + detail::xlog1py((1.0 - t_) / b_, -x) -
           log_norm_;
  }

  double operator()(double x) const { return std::exp(log_evaluate(x)); }

private:
  double t_;
  double b_;
  double log_norm_;
};

inline double evaluate(const BetaKernel& k, double x)
{
  return k(x);
}

//! E(xi) - t for xi ~ K_{t,b}; equals b(1 - 2t)/(1 + 2b).
inline double mean_shift(const BetaKernel& k)
{
  const double t = k.t();
  const double b = k.b();
  return b * (1.0 - 2.0 * t) / (1.0 + 2.0 * b);
}

//! Var(xi) for xi ~ K_{t,b}; equals b(t + b)(1 - t + b) / ((1 + 2b)^2 (1 + 3b)).
inline double kernel_variance(const BetaKernel& k)
{
  const double t = k.t();
  const double b = k.b();
  const double s = 1.0 + 2.0 * b;
  return b * (t + b) * (1.0 - t + b) / (s * s * (1.0 + 3.0 * b));
}

//! Remainder of the first-moment expansion E(xi) - t = b(1 - 2t) + Delta_1.
inline double remainder_delta1(const BetaKernel& k)
{
  const double t = k.t();
  const double b = k.b();
  return -2.0 * b * b * (1.0 - 2.0 * t) / (1.0 + 2.0 * b);
}

//! Remainder of the variance expansion Var(xi) = b t(1 - t) + Delta_2.
inline double remainder_delta2(const BetaKernel& k)
{
  const double t = k.t();
  const double b = k.b();
  const double s = t * (1.0 - t);
  const double d = 1.0 + 2.0 * b;
  return b * b * (1.0 + b - s * (7.0 + 16.0 * b + 12.0 * b * b)) /
         (d * d * (1.0 + 3.0 * b));
}

//! log A_b(t), A_b(t) = B(2t/b + 1, 2(1 - t)/b + 1) / B(t/b + 1, (1 - t)/b + 1)^2.
inline double log_a_b(double t, double b)
{
  const BetaKernel k(t, b);
  return log_beta(2.0 * k.alpha() - 1.0, 2.0 * k.beta_shape() - 1.0) -
         2.0 * k.log_normalizer();
}

//! A_b(t) = integral of K_{t,b}(x)^2 over [0, 1].
inline double a_b(double t, double b)
{
  return std::exp(log_a_b(t, b));
}

//! Exact Stirling constant c(b) of the R-function representation of A_b(t).
inline double chen_constant(double b)
{
  detail::require(b > 0.0 && b < 1.0, "chen_constant: b must lie in (0, 1)");
  const double w = 1.0 / b;
  const double log_c = -1.0 - std::log(2.0) - 0.5 * std::log(std::numbers::pi) +
                       std::log(b) + 1.5 * std::log1p(w) +
                       (2.0 * w + 1.5) * std::log1p(1.0 / (2.0 * w + 1.0));
  return std::exp(log_c);
}

//! Closed-form approximation of c(b) in which the last factor is
//! (1 + (2/b + 5/2)^{-1})^{2/b + 3}; agrees with chen_constant as b -> 0.
inline double chen_constant_approx(double b)
{
  detail::require(b > 0.0 && b < 1.0,
                  "chen_constant_approx: b must lie in (0, 1)");
  const double w = 1.0 / b;
  const double log_c = -1.0 - std::log(2.0) - 0.5 * std::log(std::numbers::pi) +
                       std::log(b) + 1.5 * std::log1p(w) +
                       (2.0 * w + 3.0) * std::log1p(1.0 / (2.0 * w + 2.5));
  return std::exp(log_c);
}

//! A_b(t) through the R-function representation. Undefined at t in {0, 1}.
inline double a_b_r_form(double t, double b)
{
  detail::require(t > 0.0 && t < 1.0, "a_b_r_form: t must lie in (0, 1)");
  detail::require(b > 0.0 && b < 1.0, "a_b_r_form: b must lie in (0, 1)");
  const double u = t / b;
  const double v = (1.0 - t) / b;
  // log R(z) = -log_gamma_correction(z)
  auto log_r = [](double z) { return -log_gamma_correction(z); };
  const double log_ratio = 2.0 * log_r(u) + 2.0 * log_r(v) +
                           log_r(2.0 / b + 1.0) - log_r(2.0 * u) -
                           log_r(2.0 * v) - 2.0 * log_r(1.0 / b + 1.0);
  return chen_constant(b) / std::sqrt(t * (1.0 - t)) * std::exp(log_ratio);
}

//! K_{t,b}(t) from the R-function closed form. Undefined at t in {0, 1}.
inline double peak_height(const BetaKernel& k)
{
  const double t = k.t();
  const double b = k.b();
  detail::require(t > 0.0 && t < 1.0, "peak_height: t must lie in (0, 1)");
  return r_function(t / b) * r_function((1.0 - t) / b) * std::sqrt(b) *
         (1.0 + 1.0 / b) /
         (r_function(1.0 / b) *
          std::sqrt(2.0 * std::numbers::pi * t * (1.0 - t)));
}

//! One draw xi ~ K_{t,b}.
inline double kernel_sample(const BetaKernel& k, RandomStream& rng)
{
  return beta_sample(k.params(), rng);
}

} // namespace betakde
