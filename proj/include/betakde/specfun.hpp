#pragma once

#include "random.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace betakde {

namespace detail {

inline constexpr double half_log_two_pi = 0.91893853320467274178;

inline void require(bool ok, const char* what)
{
  if (!ok)
    throw std::domain_error(what);
}

// x * log(y) with the convention 0 * log(0) = 0.
inline double xlogy(double x, double y)
{
  if (x == 0.0)
    return 0.0;
  return x * std::log(y);
}

// x * log1p(y) with the convention 0 * log(0) = 0.
inline double xlog1py(double x, double y)
{
  if (x == 0.0)
    return 0.0;
  return x * std::log1p(y);
}

// Asymptotic series of the Stirling remainder, accurate to ~1 ulp for z >= 10.
inline double stirling_series(double z)
{
  // B_{2k} / (2k (2k - 1)), k = 1..8
  static constexpr std::array<double, 8> coef = {
    1.0 / 12.0,           -1.0 / 360.0,   1.0 / 1260.0, -1.0 / 1680.0,
    1.0 / 1188.0,         -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0
  };
  const double w = 1.0 / (z * z);
  double sum = coef.back();
  for (std::size_t k = coef.size() - 1; k-- > 0;)
    sum = sum * w + coef[k];
  return sum / z;
}

// Lanczos approximation (g = 671/128, 14 terms) of log Gamma for small z.
inline double lanczos_log_gamma(double z)
{
  static constexpr std::array<double, 14> cof = {
    57.1562356658629235,     -59.5979603554754912,
    14.1360979747417471,     -0.491913816097620199,
    .339946499848118887e-4,  .465236289270485756e-4,
    -.983744753048795646e-4, .158088703224912494e-3,
    -.210264441724104883e-3, .217439618115212643e-3,
    -.164318106536763890e-3, .844182239838527433e-4,
    -.261908384015814087e-4, .368991826595316234e-5
  };
  double tmp = z + 5.24218750000000000;
  tmp = (z + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  double y = z;
  for (double c : cof)
    ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / z);
}

inline constexpr double stirling_threshold = 10.0;

} // namespace detail

//! Shape pair of a beta distribution.
struct BetaParams
{
  double alpha;
  double beta_shape;

  BetaParams(double a, double b)
    : alpha(a)
    , beta_shape(b)
  {
    detail::require(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b),
                    "beta shapes must be positive and finite");
  }
};

//! Natural logarithm of the gamma function for positive finite arguments.
inline double log_gamma(double z)
{
  detail::require(z > 0.0 && std::isfinite(z), "log_gamma: z must be positive");
  if (z < detail::stirling_threshold)
    return detail::lanczos_log_gamma(z);
  return (z - 0.5) * std::log(z) - z + detail::half_log_two_pi +
         detail::stirling_series(z);
}

//! Stirling remainder: log_gamma(z) - ((z - 1/2) log z - z + log(2 pi) / 2).
//! Computed without cancellation for large z.
inline double log_gamma_correction(double z)
{
  detail::require(z > 0.0 && std::isfinite(z),
                  "log_gamma_correction: z must be positive");
  if (z >= detail::stirling_threshold)
    return detail::stirling_series(z);
  return log_gamma(z) - ((z - 0.5) * std::log(z) - z + detail::half_log_two_pi);
}

//! Natural logarithm of the beta function B(a, c).
//!
//! Large arguments go through the Stirling remainders so that shapes of order
//! 1/b ~ 1e6 keep full relative accuracy.
inline double log_beta(double a, double c)
{
  detail::require(a > 0.0 && c > 0.0 && std::isfinite(a) && std::isfinite(c),
                  "log_beta: arguments must be positive");
  const double p = std::min(a, c);
  const double q = std::max(a, c);
  const double s = p + q;
  if (p >= detail::stirling_threshold) {
    const double corr = log_gamma_correction(p) + log_gamma_correction(q) -
                        log_gamma_correction(s);
    return -0.5 * std::log(q) + detail::half_log_two_pi + corr +
           (p - 0.5) * std::log(p / s) + q * std::log1p(-p / s);
  }
  if (q >= detail::stirling_threshold) {
    const double corr = log_gamma_correction(q) - log_gamma_correction(s);
    return log_gamma(p) + corr + p - p * std::log(s) +
           (q - 0.5) * std::log1p(-p / s);
  }
  return log_gamma(p) + log_gamma(q) - log_gamma(s);
}

//! R(z) = (z/e)^z sqrt(2 pi z) / Gamma(z + 1), the Stirling ratio.
//! Increasing on [0, inf), R(0) = 0 and R(z) -> 1.
inline double r_function(double z)
{
  detail::require(z >= 0.0 && !std::isnan(z), "r_function: z must be >= 0");
  if (z == 0.0)
    return 0.0;
  if (std::isinf(z))
    return 1.0;
  // log R(z) is exactly minus the Stirling remainder of log Gamma(z).
  return std::exp(-log_gamma_correction(z));
}

//! Log density of Beta(alpha, beta_shape) at x in [0, 1].
//! Returns -inf where the density is an exact zero.
inline double beta_logpdf(const BetaParams& p, double x)
{
  detail::require(x >= 0.0 && x <= 1.0, "beta_logpdf: x must lie in [0, 1]");
  return detail::xlogy(p.alpha - 1.0, x) +
         detail::xlog1py(p.beta_shape - 1.0, -x) -
         log_beta(p.alpha, p.beta_shape);
}

struct BetaMoments
{
  double mean;
  double variance;
};

inline BetaMoments beta_moments(const BetaParams& p)
{
  const double s = p.alpha + p.beta_shape;
  return { p.alpha / s, p.alpha * p.beta_shape / (s * s * (s + 1.0)) };
}

//! Gamma(shape, 1) draw: Marsaglia-Tsang squeeze for shape >= 1, boosted
//! by a uniform power for shape < 1.
inline double gamma_sample(double shape, RandomStream& rng)
{
  detail::require(shape > 0.0 && std::isfinite(shape),
                  "gamma_sample: shape must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform_open();
    return gamma_sample(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  std::normal_distribution<double> normal;
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2)
      return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

//! One Beta(alpha, beta_shape) draw as G_a / (G_a + G_b).
//! Beta(1, 1) consumes exactly one uniform draw.
inline double beta_sample(const BetaParams& p, RandomStream& rng)
{
  if (p.alpha == 1.0 && p.beta_shape == 1.0)
    return rng.uniform();
  const double ga = gamma_sample(p.alpha, rng);
  const double gb = gamma_sample(p.beta_shape, rng);
  return ga / (ga + gb);
}

} // namespace betakde
