#pragma once

#include "densities.hpp"
#include "estimator.hpp"
#include "kernel.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "risk.hpp"

#include <boost/math/tools/minima.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef BETAKDE_VERSION
#define BETAKDE_VERSION "1.0.0"
#endif

namespace betakde {

inline constexpr const char* version = BETAKDE_VERSION;

//! One tolerance test applied to a finished report.
//!
//! kinds: slope (|slope - target| <= tolerance, r^2 >= min_r_squared),
//! spread (max/min of a positive column <= max), retention (value at the
//! smallest abscissa / value at the largest >= min), range (every value in
//! [min, max]), match (|column / reference - 1| <= tolerance).
struct CheckSpec
{
  std::string kind;
  std::string column;
  std::string reference;
  double target = std::numeric_limits<double>::quiet_NaN();
  double tolerance = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double min_r_squared = std::numeric_limits<double>::quiet_NaN();
};

struct CheckResult
{
  std::string description;
  double value;
  bool passed;
};

//! Everything an experiment needs; round-trips through JSON.
struct ExperimentConfig
{
  std::string experiment;
  std::string density = "uniform";
  std::vector<std::uint64_t> n_grid;
  std::vector<double> b_grid;
  std::vector<double> t_grid;
  double p = 2.0;
  double beta = 2.0;
  double L = 1.0;
  double c = 1.0;
  std::uint64_t reps = 200;
  std::uint64_t seed = 1;
  std::uint64_t quadrature_nodes = Quadrature::default_min_nodes;
  double gate_tolerance = 1e-6;
  std::vector<CheckSpec> checks;
};

inline const std::vector<std::string>& experiment_tags()
{
  static const std::vector<std::string> tags = { "rate",        "bias-floor",
                                                 "sawtooth-bias", "log-factor",
                                                 "lemma4-check", "bound-suite" };
  return tags;
}

namespace detail {

inline bool has(const nlohmann::json& j, const char* key)
{
  return j.contains(key) && !j.at(key).is_null();
}

inline void put_optional(nlohmann::json& j, const char* key, double v)
{
  if (!std::isnan(v))
    j[key] = v;
}

inline double get_optional(const nlohmann::json& j, const char* key)
{
  return has(j, key) ? j.at(key).get<double>()
                     : std::numeric_limits<double>::quiet_NaN();
}

template<class T>
void require_increasing(const std::vector<T>& v, const char* what)
{
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1]))
      throw std::invalid_argument(std::string(what) + " must be strictly increasing");
}

} // namespace detail

inline void to_json(nlohmann::json& j, const CheckSpec& c)
{
  j = nlohmann::json{ { "kind", c.kind } };
  if (!c.column.empty())
    j["column"] = c.column;
  if (!c.reference.empty())
    j["reference"] = c.reference;
  detail::put_optional(j, "target", c.target);
  detail::put_optional(j, "tolerance", c.tolerance);
  detail::put_optional(j, "min", c.min);
  detail::put_optional(j, "max", c.max);
  detail::put_optional(j, "min_r_squared", c.min_r_squared);
}

inline void from_json(const nlohmann::json& j, CheckSpec& c)
{
  c.kind = j.at("kind").get<std::string>();
  c.column = j.value("column", std::string());
  c.reference = j.value("reference", std::string());
  c.target = detail::get_optional(j, "target");
  c.tolerance = detail::get_optional(j, "tolerance");
  c.min = detail::get_optional(j, "min");
  c.max = detail::get_optional(j, "max");
  c.min_r_squared = detail::get_optional(j, "min_r_squared");
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c)
{
  j = nlohmann::json{ { "experiment", c.experiment },
                      { "density", c.density },
                      { "n_grid", c.n_grid },
                      { "b_grid", c.b_grid },
                      { "t_grid", c.t_grid },
                      { "p", c.p },
                      { "beta", c.beta },
                      { "L", c.L },
                      { "c", c.c },
                      { "reps", c.reps },
                      { "seed", c.seed },
                      { "quadrature_nodes", c.quadrature_nodes },
                      { "gate_tolerance", c.gate_tolerance },
                      { "checks", c.checks } };
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c)
{
  ExperimentConfig d;
  c.experiment = j.at("experiment").get<std::string>();
  c.density = j.value("density", d.density);
  c.n_grid = j.value("n_grid", d.n_grid);
  c.b_grid = j.value("b_grid", d.b_grid);
  c.t_grid = j.value("t_grid", d.t_grid);
  c.p = j.value("p", d.p);
  c.beta = j.value("beta", d.beta);
  c.L = j.value("L", d.L);
  c.c = j.value("c", d.c);
  c.reps = j.value("reps", d.reps);
  c.seed = j.value("seed", d.seed);
  c.quadrature_nodes = j.value("quadrature_nodes", d.quadrature_nodes);
  c.gate_tolerance = j.value("gate_tolerance", d.gate_tolerance);
  c.checks = j.value("checks", d.checks);
}

//! Throws std::invalid_argument when the config cannot drive its experiment.
inline void validate(const ExperimentConfig& c)
{
  const auto& tags = experiment_tags();
  if (std::find(tags.begin(), tags.end(), c.experiment) == tags.end())
    throw std::invalid_argument("unknown experiment tag: " + c.experiment);
  detail::require_increasing(c.n_grid, "n_grid");
  detail::require_increasing(c.b_grid, "b_grid");
  detail::require_increasing(c.t_grid, "t_grid");
  for (auto n : c.n_grid)
    if (n < 1)
      throw std::invalid_argument("n_grid entries must be >= 1");
  for (double b : c.b_grid)
    if (!(b > 0.0 && b < 1.0))
      throw std::invalid_argument("b_grid entries must lie in (0, 1)");
  for (double t : c.t_grid)
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("t_grid entries must lie in [0, 1]");
  if (!(c.p >= 1.0))
    throw std::invalid_argument("p must be >= 1");
  if (!(c.beta > 0.0 && c.L > 0.0 && c.c > 0.0))
    throw std::invalid_argument("beta, L and c must be positive");
  if (c.quadrature_nodes < 3)
    throw std::invalid_argument("quadrature_nodes must be >= 3");
  if (!(c.gate_tolerance > 0.0))
    throw std::invalid_argument("gate_tolerance must be positive");

  const bool mc = c.experiment == "rate" || c.experiment == "bound-suite";
  if ((mc || (c.experiment == "lemma4-check" && !c.t_grid.empty())) && c.reps < 2)
    throw std::invalid_argument("reps must be >= 2");
  if (c.experiment == "rate" && c.n_grid.size() < 2)
    throw std::invalid_argument("rate needs at least two n values");
  if (c.experiment != "rate" && c.b_grid.empty())
    throw std::invalid_argument(c.experiment + " needs a non-empty b_grid");
  if ((c.experiment == "log-factor" || c.experiment == "bound-suite") &&
      c.n_grid.empty())
    throw std::invalid_argument(c.experiment + " needs a non-empty n_grid");
  for (const auto& chk : c.checks) {
    static const std::vector<std::string> kinds = { "slope", "spread", "retention",
                                                    "range", "match" };
    if (std::find(kinds.begin(), kinds.end(), chk.kind) == kinds.end())
      throw std::invalid_argument("unknown check kind: " + chk.kind);
  }
}

inline ExperimentConfig parse_config(const std::string& json_text)
{
  ExperimentConfig c = nlohmann::json::parse(json_text).get<ExperimentConfig>();
  validate(c);
  return c;
}

inline std::string dump_config(const ExperimentConfig& c)
{
  return nlohmann::json(c).dump();
}

//! 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a(const std::string& bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(dump_config(c))));
  return buf;
}

//! Ordinary least squares on (ln x, ln y).
struct SlopeFit
{
  double slope;
  double intercept;
  double slope_stderr;
  double r_squared;
};

inline SlopeFit slope_fit(std::span<const double> xs, std::span<const double> ys)
{
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("slope_fit: need two equal-length lists of >= 2");
  const auto m = static_cast<double>(xs.size());
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0 && ys[i] > 0.0))
      throw std::invalid_argument("slope_fit: entries must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("slope_fit: x values are all equal");
  SlopeFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
  }
  f.slope_stderr = xs.size() > 2 ? std::sqrt(ssr / (m - 2.0) / sxx) : 0.0;
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return f;
}

//! Quadrature convergence gate: every gated value recomputed on q.refined().
struct GateResult
{
  bool applied = false;
  double max_rel_change = 0.0;
  double tolerance = 1e-6;
  bool passed() const { return !applied || max_rel_change <= tolerance; }
};

struct ExperimentReport
{
  ExperimentConfig config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::optional<SlopeFit> fit;
  std::string fit_x;
  std::string fit_y;
  GateResult gate;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, std::string>> notes;

  std::vector<double> column(const std::string& name) const
  {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end())
      throw std::invalid_argument("report has no column " + name);
    const auto k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
      out.push_back(r[k]);
    return out;
  }

  bool checks_passed() const
  {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed; });
  }

  bool ok() const { return gate.passed() && checks_passed(); }
};

namespace detail {

// Relative change, with differences below `floor` in absolute size measured
// against floor instead.
inline double rel_change(double coarse, double fine, double floor = 0.0)
{
  if (coarse == fine)
    return 0.0;
  const double scale = std::max({ std::abs(coarse), std::abs(fine), floor });
  return std::abs(fine - coarse) / scale;
}

// Absolute rounding level of a computed bias B_t = integral K f - f(t).
inline double bias_noise_floor(const TestDensity& d)
{
  return 1e-12 * d.sup();
}

inline std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void fit_columns(ExperimentReport& r, const std::string& x, const std::string& y)
{
  r.fit_x = x;
  r.fit_y = y;
  if (r.rows.size() >= 2)
    r.fit = slope_fit(r.column(x), r.column(y));
}

inline bool is_sawtooth_spec(const std::string& spec)
{
  return spec.rfind("sawtooth", 0) == 0;
}

inline Quadrature quadrature_for(const ExperimentConfig& c, double b)
{
  return Quadrature::for_bandwidth(b, c.quadrature_nodes);
}

} // namespace detail

//! Applies the config's checks to a report in place.
inline void evaluate_checks(ExperimentReport& r)
{
  r.checks.clear();
  for (const auto& c : r.config.checks) {
    CheckResult out{};
    if (c.kind == "slope") {
      if (!r.fit)
        throw std::invalid_argument("slope check on a report without a fit");
      const double dev = std::abs(r.fit->slope - c.target);
      out.value = r.fit->slope;
      out.passed = dev <= c.tolerance &&
                   (std::isnan(c.min_r_squared) || r.fit->r_squared >= c.min_r_squared);
      out.description = "slope(" + r.fit_y + " vs " + r.fit_x + ") = " +
                        detail::fmt(c.target) + " +- " + detail::fmt(c.tolerance);
      if (!std::isnan(c.min_r_squared))
        out.description += ", r^2 >= " + detail::fmt(c.min_r_squared) +
                           " (r^2 = " + detail::fmt(r.fit->r_squared) + ")";
    } else if (c.kind == "spread") {
      const auto v = r.column(c.column);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      out.value = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
      out.passed = out.value <= c.max;
      out.description = "max/min(" + c.column + ") <= " + detail::fmt(c.max);
    } else if (c.kind == "retention") {
      const auto v = r.column(c.column);
      const auto x = r.column(r.columns.front());
      const auto lo = std::min_element(x.begin(), x.end()) - x.begin();
      const auto hi = std::max_element(x.begin(), x.end()) - x.begin();
      out.value = v[static_cast<std::size_t>(lo)] / v[static_cast<std::size_t>(hi)];
      out.passed = out.value >= c.min;
      out.description = c.column + " at smallest " + r.columns.front() + " / at largest >= " +
                        detail::fmt(c.min);
    } else if (c.kind == "range") {
      const auto v = r.column(c.column);
      out.passed = true;
      out.value = std::isnan(c.min) ? *std::max_element(v.begin(), v.end())
                                    : *std::min_element(v.begin(), v.end());
      for (double x : v) {
        const bool in = (std::isnan(c.min) || x >= c.min) && (std::isnan(c.max) || x <= c.max);
        if (!in && out.passed) {
          out.passed = false;
          out.value = x;
        }
      }
      if (std::isnan(c.min))
        out.description = c.column + " <= " + detail::fmt(c.max);
      else if (std::isnan(c.max))
        out.description = c.column + " >= " + detail::fmt(c.min);
      else
        out.description = c.column + " in [" + detail::fmt(c.min) + ", " + detail::fmt(c.max) + "]";
    } else if (c.kind == "match") {
      const auto v = r.column(c.column);
      const auto ref = r.column(c.reference);
      out.value = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.value = std::max(out.value, detail::rel_change(ref[i], v[i]));
      out.passed = out.value <= c.tolerance;
      out.description = c.column + " matches " + c.reference + " to " + detail::fmt(c.tolerance);
    }
    r.checks.push_back(out);
  }
}

//! Risk against n with b_n = c n^{-2/(2 beta + 1)}.
//! Every n uses the same replication streams (seed, r).
//! Columns: n, b, risk, stderr.
inline ExperimentReport run_rate_experiment(const ExperimentConfig& cfg)
{
  validate(cfg);
  if (detail::is_sawtooth_spec(cfg.density))
    throw std::invalid_argument("rate: the sawtooth density changes with b");
  const TestDensity d = parse_density(cfg.density);
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "n", "b", "risk", "stderr" };
  for (auto n : cfg.n_grid) {
    const double b = theoretical_bandwidth(n, cfg.beta, cfg.c);
    const auto mc = mc_risk(d, b, n, cfg.p, cfg.reps, cfg.seed, detail::quadrature_for(cfg, b));
    r.rows.push_back({ static_cast<double>(n), b, mc.value, mc.std_error });
  }
  detail::fit_columns(r, "n", "risk");
  r.notes.emplace_back("target_slope", detail::fmt(-cfg.beta / (2.0 * cfg.beta + 1.0)));
  evaluate_checks(r);
  return r;
}

//! Integrated bias of the linear density against b.
//! Columns: b, integrated_bias, ratio (= integrated_bias / b), closed_form.
inline ExperimentReport run_bias_floor_experiment(const ExperimentConfig& cfg)
{
  validate(cfg);
  const TestDensity d = parse_density(cfg.density);
  if (!d.is<density::Linear>())
    throw std::invalid_argument("bias-floor: density must be linear");
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "b", "integrated_bias", "ratio", "closed_form" };
  r.gate.applied = true;
  r.gate.tolerance = cfg.gate_tolerance;
  for (double b : cfg.b_grid) {
    const auto q = detail::quadrature_for(cfg, b);
    const double v = integrated_bias(d, b, cfg.p, q);
    const double v_fine = integrated_bias(d, b, cfg.p, q.refined());
    r.gate.max_rel_change = std::max(r.gate.max_rel_change, detail::rel_change(v, v_fine));
    // |B_t| = 2b|1 - 2t|/(1 + 2b) and the p-th mean of |1 - 2t| is (p + 1)^{-1/p}
    const double exact = 2.0 * b / (1.0 + 2.0 * b) * std::pow(cfg.p + 1.0, -1.0 / cfg.p);
    r.rows.push_back({ b, v, v / b, exact });
  }
  detail::fit_columns(r, "b", "integrated_bias");
  evaluate_checks(r);
  return r;
}

//! Integrated bias of the b-matched sawtooth density.
//! Columns: b, integrated_bias, ratio (= integrated_bias / b^{beta/2}), N.
inline ExperimentReport run_sawtooth_bias_experiment(const ExperimentConfig& cfg)
{
  validate(cfg);
  if (!detail::is_sawtooth_spec(cfg.density))
    throw std::invalid_argument("sawtooth-bias: density must be sawtooth");
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "b", "integrated_bias", "ratio", "N" };
  r.gate.applied = true;
  r.gate.tolerance = cfg.gate_tolerance;
  for (double b : cfg.b_grid) {
    const TestDensity d = parse_density(cfg.density, b);
    const auto& saw = d.as<density::Sawtooth>();
    const auto q = detail::quadrature_for(cfg, b);
    const double v = integrated_bias(d, b, cfg.p, q);
    const double v_fine = integrated_bias(d, b, cfg.p, q.refined());
    r.gate.max_rel_change = std::max(r.gate.max_rel_change, detail::rel_change(v, v_fine));
    r.rows.push_back({ b, v, v / std::pow(b, saw.beta / 2.0), static_cast<double>(saw.N) });
  }
  detail::fit_columns(r, "b", "integrated_bias");
  evaluate_checks(r);
  return r;
}

//! Minimiser over b in (0, 1) of b^{beta/2} + |log b| / (n b^{1/2})^{1/2}.
inline double log_penalized_minimizer(double n, double beta)
{
  detail::require(n >= 1.0 && beta > 0.0,
                  "log_penalized_minimizer: need n >= 1 and beta > 0");
  auto objective = [&](double log_b) {
    const double b = std::exp(log_b);
    return std::pow(b, beta / 2.0) + std::abs(log_b) / std::sqrt(n * std::sqrt(b));
  };
  const auto r = boost::math::tools::brent_find_minima(objective, std::log(1e-300), 0.0,
                                                       std::numeric_limits<double>::digits);
  return std::exp(r.first);
}

//! Normalised variance integral of the uniform density against d_n(b, p).
//! Columns: b, normalized_variance (= integral (E Z_t^2)^{p/2} (n b^{1/2})^{p/2}),
//! d_n, ratio, correction. correction is the same normalisation applied to the
//! gap left by dropping the -1/n term of E Z_t^2.
inline ExperimentReport run_log_factor_experiment(const ExperimentConfig& cfg)
{
  validate(cfg);
  const TestDensity d = parse_density(cfg.density);
  if (!d.is<density::Uniform>())
    throw std::invalid_argument("log-factor: density must be uniform");
  if (cfg.n_grid.size() != 1)
    throw std::invalid_argument("log-factor: n_grid must hold exactly one n");
  const std::size_t n = cfg.n_grid.front();
  const auto nn = static_cast<double>(n);
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "b", "normalized_variance", "d_n", "ratio", "correction" };
  r.gate.applied = true;
  r.gate.tolerance = cfg.gate_tolerance;
  for (double b : cfg.b_grid) {
    const auto q = detail::quadrature_for(cfg, b);
    const double scale = std::pow(nn * std::sqrt(b), cfg.p / 2.0);
    const double v = integrated_variance_term(d, b, n, cfg.p, q) * scale;
    const double v_fine = integrated_variance_term(d, b, n, cfg.p, q.refined()) * scale;
    r.gate.max_rel_change = std::max(r.gate.max_rel_change, detail::rel_change(v, v_fine));
    const Quadrature qa = detail::adapted(q, d);
    const double raw =
      qa.integrate_fn([&](double t) { return std::pow(a_b(t, b) / nn, cfg.p / 2.0); }) *
      scale;
    const double dnv = dn(b, cfg.p);
    r.rows.push_back({ b, v, dnv, dnv > 0.0 ? v / dnv : 0.0, raw - v });
  }
  detail::fit_columns(r, "b", "normalized_variance");
  r.notes.emplace_back("log_penalized_minimizer",
                       detail::fmt(log_penalized_minimizer(nn, cfg.beta)));
  evaluate_checks(r);
  return r;
}

//! Suprema of |Delta_j| / b^2 over 1001 equispaced t, and Monte Carlo z-scores
//! of the kernel mean and variance at t_grid using `reps` draws per point.
//! Columns: b, sup_delta1_over_b2, sup_delta2_over_b2, max_z_mean, max_z_variance.
inline ExperimentReport run_lemma4_check(const ExperimentConfig& cfg)
{
  validate(cfg);
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "b", "sup_delta1_over_b2", "sup_delta2_over_b2", "max_z_mean",
                "max_z_variance" };
  constexpr int grid = 1001;
  std::uint64_t stream = 0;
  for (double b : cfg.b_grid) {
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < grid; ++i) {
      const BetaKernel k(static_cast<double>(i) / (grid - 1), b);
      s1 = std::max(s1, std::abs(remainder_delta1(k)) / (b * b));
      s2 = std::max(s2, std::abs(remainder_delta2(k)) / (b * b));
    }
    double zm = 0.0, zv = 0.0;
    for (double t : cfg.t_grid) {
      const BetaKernel k(t, b);
      RandomStream rng(cfg.seed, stream++);
      const auto draws = static_cast<std::size_t>(cfg.reps);
      std::vector<double> x(draws);
      for (auto& v : x)
        v = kernel_sample(k, rng);
      double mean = 0.0;
      for (double v : x)
        mean += v;
      mean /= static_cast<double>(draws);
      double m2 = 0.0, m4 = 0.0;
      for (double v : x) {
        const double d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
      }
      const double var = m2 / static_cast<double>(draws - 1);
      m4 /= static_cast<double>(draws);
      const double exact_mean = t + mean_shift(k);
      const double exact_var = kernel_variance(k);
      const double se_mean = std::sqrt(var / static_cast<double>(draws));
      const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / static_cast<double>(draws));
      zm = std::max(zm, std::abs(mean - exact_mean) / se_mean);
      zv = std::max(zv, std::abs(var - exact_var) / se_var);
    }
    r.rows.push_back({ b, s1, s2, zm, zv });
  }
  evaluate_checks(r);
  return r;
}

//! Convexity lower bounds against Monte Carlo risk for every (b, n).
//! Columns: b, n, p, risk_pth, bias_bound, variance_bound, bias_margin,
//! variance_margin. The gate covers the two exact bounds; the bias bound is
//! compared on its p-th root scale.
inline ExperimentReport run_bound_suite(const ExperimentConfig& cfg)
{
  validate(cfg);
  ExperimentReport r;
  r.config = cfg;
  r.columns = { "b",          "n",           "p",           "risk_pth",
                "bias_bound", "variance_bound", "bias_margin", "variance_margin" };
  r.gate.applied = true;
  r.gate.tolerance = cfg.gate_tolerance;
  for (double b : cfg.b_grid) {
    const TestDensity d = parse_density(cfg.density, b);
    const auto q = detail::quadrature_for(cfg, b);
    const double bias_fine = integrated_bias(d, b, cfg.p, q.refined());
    // changes at the rounding level of B_t pass the gate
    const double bias_floor = detail::bias_noise_floor(d) / cfg.gate_tolerance;
    for (auto n : cfg.n_grid) {
      const auto mc = mc_risk(d, b, n, cfg.p, cfg.reps, cfg.seed, q);
      const auto lb = lower_bound_check(d, b, n, cfg.p, mc, q);
      const double var_fine =
        std::pow(2.0, -cfg.p) * integrated_variance_term(d, b, n, cfg.p, q.refined());
      r.gate.max_rel_change =
        std::max(r.gate.max_rel_change,
                 detail::rel_change(std::pow(lb.bias_bound, 1.0 / cfg.p), bias_fine,
                                    bias_floor));
      r.gate.max_rel_change =
        std::max(r.gate.max_rel_change, detail::rel_change(lb.variance_bound, var_fine));
      r.rows.push_back({ b, static_cast<double>(n), cfg.p, lb.risk_pth, lb.bias_bound,
                         lb.variance_bound, lb.bias_margin, lb.variance_margin });
    }
  }
  evaluate_checks(r);
  return r;
}

//! Dispatches on cfg.experiment.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg)
{
  validate(cfg);
  if (cfg.experiment == "rate")
    return run_rate_experiment(cfg);
  if (cfg.experiment == "bias-floor")
    return run_bias_floor_experiment(cfg);
  if (cfg.experiment == "sawtooth-bias")
    return run_sawtooth_bias_experiment(cfg);
  if (cfg.experiment == "log-factor")
    return run_log_factor_experiment(cfg);
  if (cfg.experiment == "lemma4-check")
    return run_lemma4_check(cfg);
  return run_bound_suite(cfg);
}

//! Decimal with 17 significant digits.
inline std::string format_number(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

//! Comment lines with version, seed, config hash and the config itself.
inline void write_metadata(std::ostream& out,
                           const std::string& what,
                           std::uint64_t seed,
                           const std::string& hash,
                           const std::string& config_json)
{
  out << "# betakde " << version << '\n'
      << "# run: " << what << '\n'
      << "# seed: " << seed << '\n'
      << "# config_hash: " << hash << '\n'
      << "# config: " << config_json << '\n';
}

inline void write_csv(std::ostream& out, const ExperimentReport& r)
{
  write_metadata(out, r.config.experiment, r.config.seed, config_hash(r.config),
                 dump_config(r.config));
  if (r.fit)
    out << "# fit: x=" << r.fit_x << " y=" << r.fit_y
        << " slope=" << format_number(r.fit->slope)
        << " intercept=" << format_number(r.fit->intercept)
        << " slope_stderr=" << format_number(r.fit->slope_stderr)
        << " r_squared=" << format_number(r.fit->r_squared) << '\n';
  if (r.gate.applied)
    out << "# gate: max_rel_change=" << format_number(r.gate.max_rel_change)
        << " tolerance=" << format_number(r.gate.tolerance)
        << (r.gate.passed() ? " pass" : " FAIL") << '\n';
  for (const auto& [key, value] : r.notes)
    out << "# " << key << ": " << value << '\n';
  for (const auto& c : r.checks)
    out << "# check: " << c.description << " value=" << format_number(c.value)
        << (c.passed ? " pass" : " FAIL") << '\n';
  for (std::size_t i = 0; i < r.columns.size(); ++i)
    out << (i ? "," : "") << r.columns[i];
  out << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

} // namespace betakde
