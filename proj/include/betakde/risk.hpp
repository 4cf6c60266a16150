#pragma once

#include "densities.hpp"
#include "estimator.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace betakde {

//! Monte Carlo estimate of (E ||f_b - f||_p^p)^{1/p}.
struct RiskEstimate
{
  double value = 0.0;  //!< (mean loss)^{1/p}
  double std_error = 0.0; //!< delta-method standard error of value
  std::size_t reps = 0;
  double p = 2.0;
  double mean_loss = 0.0;   //!< mean of ||f_b - f||_p^p over replications
  double loss_stderr = 0.0; //!< standard error of mean_loss
};

namespace detail {

// Exact kernel functionals of one density at one bandwidth.
class KernelFunctionals
{
public:
  KernelFunctionals(const TestDensity& d, double b, const Quadrature& q)
    : d_(d)
    , b_(b)
    , integrator_(d.breakpoints(), d.cusps(), q.inner_refinement())
  {
    require(b > 0.0 && b < 1.0, "bandwidth must lie in (0, 1)");
  }

  // { integral K f, integral K^2 f } at t
  std::pair<double, double> moments(double t) const
  {
    const BetaKernel k(t, b_);
    return integrator_.first_two(k, [this](double x) { return eval_density(d_, x); });
  }

  double bias(double t) const { return moments(t).first - eval_density(d_, t); }

  // n Var(f_b(t)) = integral K^2 f - (integral K f)^2
  double unit_variance(double t) const
  {
    const auto [m1, m2] = moments(t);
    return std::max(0.0, m2 - m1 * m1);
  }

private:
  const TestDensity& d_;
  double b_;
  KernelIntegrator integrator_;
};

// q with the density's breakpoints as panel edges and its cusps graded.
inline Quadrature adapted(const Quadrature& q, const TestDensity& d)
{
  return q.with_features(d.breakpoints(), d.cusps());
}

// Root of a sign-changing function on [lo, hi].
template<class F>
double bracketed_root(F&& f, double lo, double hi, double f_lo, double f_hi)
{
  std::uintmax_t iterations = 100;
  const auto r = boost::math::tools::toms748_solve(
    f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50),
    iterations);
  return 0.5 * (r.first + r.second);
}

} // namespace detail

//! B_t = E f_b(t) - f(t) = integral of K_{t,b} f minus f(t).
inline double bias_at(const TestDensity& d, double b, double t, const Quadrature& q)
{
  return detail::KernelFunctionals(d, b, q).bias(t);
}

//! E Z_t^2 = Var f_b(t) = (integral K^2 f - (integral K f)^2) / n.
inline double variance_at(const TestDensity& d,
                          double b,
                          std::size_t n,
                          double t,
                          const Quadrature& q)
{
  detail::require(n >= 1, "variance_at: n must be >= 1");
  return detail::KernelFunctionals(d, b, q).unit_variance(t) /
         static_cast<double>(n);
}

//! (integral over t of |B_t|^p)^{1/p}.
//! The mesh is adapted to the density; unless p is an even integer the
//! panels containing a sign change of B_t are split at its root, where
//! |B_t|^p is not smooth.
inline double integrated_bias(const TestDensity& d,
                              double b,
                              double p,
                              const Quadrature& q)
{
  detail::require(p >= 1.0, "integrated_bias: p must be >= 1");
  const detail::KernelFunctionals f(d, b, q);
  const Quadrature qa = detail::adapted(q, d);
  const auto& nodes = qa.nodes();
  std::vector<double> bias(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) { bias[i] = f.bias(nodes[i]); });

  auto powered = [p](std::vector<double> v) {
    for (double& x : v)
      x = std::pow(std::abs(x), p);
    return v;
  };
  const bool smooth = p == 2.0 * std::floor(p / 2.0);
  std::vector<std::size_t> changes;
  for (std::size_t i = 0; !smooth && i + 1 < nodes.size(); ++i)
    if ((bias[i] < 0.0 && bias[i + 1] > 0.0) || (bias[i] > 0.0 && bias[i + 1] < 0.0))
      changes.push_back(i);
  if (changes.empty())
    return std::pow(qa.integrate(powered(bias)), 1.0 / p);

  std::vector<double> roots(changes.size());
  parallel_for(changes.size(), [&](std::size_t j) {
    const std::size_t i = changes[j];
    roots[j] = detail::bracketed_root([&](double t) { return f.bias(t); },
                                      nodes[i], nodes[i + 1], bias[i],
                                      bias[i + 1]);
  });
  const Quadrature qs = qa.split_at(roots);
  std::unordered_map<double, double> known;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    known.emplace(nodes[i], bias[i]);
  const auto& split_nodes = qs.nodes();
  std::vector<double> split_bias(split_nodes.size());
  parallel_for(split_nodes.size(), [&](std::size_t i) {
    const auto it = known.find(split_nodes[i]);
    split_bias[i] = it != known.end() ? it->second : f.bias(split_nodes[i]);
  });
  return std::pow(qs.integrate(powered(std::move(split_bias))), 1.0 / p);
}

//! integral over t of (E Z_t^2)^{p/2} (without any 2^{-p} factor).
inline double integrated_variance_term(const TestDensity& d,
                                       double b,
                                       std::size_t n,
                                       double p,
                                       const Quadrature& q)
{
  detail::require(p >= 1.0, "integrated_variance_term: p must be >= 1");
  detail::require(n >= 1, "integrated_variance_term: n must be >= 1");
  const detail::KernelFunctionals f(d, b, q);
  const Quadrature qa = detail::adapted(q, d);
  const auto& nodes = qa.nodes();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> vals(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) {
    vals[i] = std::pow(f.unit_variance(nodes[i]) * inv_n, 0.5 * p);
  });
  return qa.integrate(vals);
}

//! d_n(b, p) = integral from 1/2 to 1 - b of (1 - t)^{-p/4} dt, closed form.
inline double dn(double b, double p)
{
  detail::require(b > 0.0 && b < 1.0, "dn: b must lie in (0, 1)");
  detail::require(p >= 1.0, "dn: p must be >= 1");
  if (b >= 0.5)
    return 0.0;
  if (p == 4.0)
    return std::log(1.0 / (2.0 * b));
  const double e = 1.0 - p / 4.0;
  return (std::pow(0.5, e) - std::pow(b, e)) / e;
}

//! ||f_b - f||_p^p on the quadrature grid for one fitted sample.
inline double lp_loss(const EstimatorFit& est,
                      std::span<const double> truth,
                      double p,
                      const Quadrature& q)
{
  const auto& nodes = q.nodes();
  const auto& w = q.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double diff = std::abs(est(nodes[i]) - truth[i]);
    total += w[i] * (p == 2.0 ? diff * diff : std::pow(diff, p));
  }
  return total;
}

//! Monte Carlo L^p risk: replication r draws n points with stream (seed, r).
//! The loss is integrated on q adapted to the density. Replications run in
//! parallel; the reduction is an ordered fold.
inline RiskEstimate mc_risk(const TestDensity& d,
                            double b,
                            std::size_t n,
                            double p,
                            std::size_t reps,
                            std::uint64_t seed,
                            const Quadrature& q)
{
  detail::require(reps >= 2, "mc_risk: reps must be >= 2");
  detail::require(p >= 1.0, "mc_risk: p must be >= 1");
  detail::require(n >= 1, "mc_risk: n must be >= 1");
  detail::require(b > 0.0 && b < 1.0, "mc_risk: b must lie in (0, 1)");

  const Quadrature qa = detail::adapted(q, d);
  std::vector<double> truth(qa.size());
  for (std::size_t i = 0; i < qa.size(); ++i)
    truth[i] = eval_density(d, qa.nodes()[i]);

  std::vector<double> losses(reps);
  parallel_for(reps, [&](std::size_t r) {
    RandomStream rng(seed, r);
    const EstimatorFit est(Sample(sample(d, n, rng)), b);
    losses[r] = lp_loss(est, truth, p, qa);
  });

  double mean = 0.0;
  for (double l : losses)
    mean += l;
  mean /= static_cast<double>(reps);
  double ss = 0.0;
  for (double l : losses)
    ss += (l - mean) * (l - mean);
  const double sd = std::sqrt(ss / static_cast<double>(reps - 1));

  RiskEstimate out;
  out.reps = reps;
  out.p = p;
  out.mean_loss = mean;
  out.loss_stderr = sd / std::sqrt(static_cast<double>(reps));
  out.value = std::pow(mean, 1.0 / p);
  out.std_error = out.value > 0.0
                 ? out.loss_stderr / (p * std::pow(out.value, p - 1.0))
                 : 0.0;
  return out;
}

//! Shape of the moment bound for centred i.i.d. means (constant C_p = 1):
//! (v/n)^{p/2} for p <= 2, v s^{p-2}/n^{p-1} + (v/n)^{p/2} for p > 2.
inline double moment_upper_bound(double v, double sup_norm, std::size_t n, double p)
{
  detail::require(v >= 0.0 && sup_norm >= 0.0,
                  "moment_upper_bound: v and sup_norm must be >= 0");
  detail::require(n >= 1, "moment_upper_bound: n must be >= 1");
  const double nn = static_cast<double>(n);
  const double gauss_part = std::pow(v / nn, 0.5 * p);
  if (p <= 2.0)
    return gauss_part;
  return v * std::pow(sup_norm, p - 2.0) / std::pow(nn, p - 1.0) + gauss_part;
}

//! Monte Carlo E|Z_t|^2 and its standard error over `fits` independent fits.
struct SecondMoment
{
  double value;
  double std_error;
};

inline SecondMoment mc_centered_second_moment(const TestDensity& d,
                                              double b,
                                              std::size_t n,
                                              double t,
                                              double mean_estimate,
                                              std::size_t fits,
                                              std::uint64_t seed)
{
  detail::require(fits >= 2, "mc_centered_second_moment: fits must be >= 2");
  std::vector<double> sq(fits);
  parallel_for(fits, [&](std::size_t r) {
    RandomStream rng(seed, r);
    const EstimatorFit est(Sample(sample(d, n, rng)), b);
    const double z = est(t) - mean_estimate;
    sq[r] = z * z;
  });
  double mean = 0.0;
  for (double s : sq)
    mean += s;
  mean /= static_cast<double>(fits);
  double ss = 0.0;
  for (double s : sq)
    ss += (s - mean) * (s - mean);
  return { mean,
           std::sqrt(ss / static_cast<double>(fits - 1)) /
             std::sqrt(static_cast<double>(fits)) };
}

//! Outcome of the two convexity lower bounds against a Monte Carlo risk.
struct LowerBoundReport
{
  double risk_pth;         //!< mc.mean_loss + 4 mc.loss_stderr
  double bias_bound;       //!< integral of |B_t|^p
  double variance_bound;   //!< 2^{-p} integral of (E Z_t^2)^{p/2}
  double bias_margin;      //!< risk_pth - bias_bound
  double variance_margin;  //!< risk_pth - variance_bound
  bool bias_holds;
  bool variance_holds;
};

inline LowerBoundReport lower_bound_check(const TestDensity& d,
                                          double b,
                                          std::size_t n,
                                          double p,
                                          const RiskEstimate& mc,
                                          const Quadrature& q)
{
  LowerBoundReport r{};
  r.risk_pth = mc.mean_loss + 4.0 * mc.loss_stderr;
  r.bias_bound = std::pow(integrated_bias(d, b, p, q), p);
  r.variance_bound =
    std::pow(2.0, -p) * integrated_variance_term(d, b, n, p, q);
  r.bias_margin = r.risk_pth - r.bias_bound;
  r.variance_margin = r.risk_pth - r.variance_bound;
  r.bias_holds = r.bias_margin >= 0.0;
  r.variance_holds = r.variance_margin >= 0.0;
  return r;
}

} // namespace betakde
