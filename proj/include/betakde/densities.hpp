#pragma once

#include "random.hpp"
#include "specfun.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace betakde {

//! Hoelder class Sigma(beta, L); m is the largest integer strictly below beta.
struct HolderClass
{
  double beta;
  double L;

  HolderClass(double beta_, double L_)
    : beta(beta_)
    , L(L_)
  {
    detail::require(beta > 0.0 && L > 0.0 && std::isfinite(beta) &&
                      std::isfinite(L),
                    "HolderClass: beta and L must be positive");
  }

  int m() const { return static_cast<int>(std::ceil(beta)) - 1; }
};

namespace density {

struct Uniform
{};

struct Linear
{};

//! 1 + a cos(2 pi x), a in (0, 1).
struct Cosine
{
  double a;
};

//! The b-coupled alternating-bump density with 2N cells of width 1/(2N).
struct Sawtooth
{
  double beta;
  double L;
  double b;
  int N;
  double L_beta;

  //! Bump centre t_k = (2k - 1)/(4N), k = 1..2N.
  double centre(int k) const { return (2.0 * k - 1.0) / (4.0 * N); }
  //! Height of every bump above (or below) 1.
  double amplitude() const { return L_beta * std::pow(4.0 * N, -beta); }
  //! 1-based cell index containing x; cells are half open, the last closed.
  int cell(double x) const
  {
    const int k = static_cast<int>(std::floor(x * 2.0 * N)) + 1;
    return std::clamp(k, 1, 2 * N);
  }
  double sign(int k) const { return (k % 2 == 1) ? 1.0 : -1.0; }
};

} // namespace density

//! One of the test densities on [0, 1].
class TestDensity
{
public:
  using Variant = std::variant<density::Uniform,
                               density::Linear,
                               density::Cosine,
                               density::Sawtooth>;

  static TestDensity uniform() { return TestDensity(density::Uniform{}); }
  static TestDensity linear() { return TestDensity(density::Linear{}); }

  static TestDensity cosine(double a)
  {
    detail::require(a > 0.0 && a < 1.0, "cosine density: a must lie in (0, 1)");
    return TestDensity(density::Cosine{ a });
  }

  //! N = floor(b^{-1/2} / 20) must be at least 1, i.e. b <= 1/400.
  static TestDensity sawtooth(double beta, double L, double b)
  {
    detail::require(beta > 0.0 && beta <= 2.0,
                    "sawtooth density: beta must lie in (0, 2]");
    detail::require(L > 0.0 && std::isfinite(L),
                    "sawtooth density: L must be positive");
    detail::require(b > 0.0 && b < 1.0, "sawtooth density: b must lie in (0, 1)");
    // relative slack absorbs rounding at exact boundaries such as b = 1e-4
    const double raw = 1.0 / (20.0 * std::sqrt(b));
    const double n = std::floor(raw * (1.0 + 1e-12));
    if (n < 1.0)
      throw std::domain_error("sawtooth density: b > 1/400 gives N = 0 bumps");
    const double L_beta = 0.5 * L * std::min(1.0, 1.0 / beta);
    return TestDensity(
      density::Sawtooth{ beta, L, b, static_cast<int>(n), L_beta });
  }

  const Variant& variant() const { return v_; }

  template<class T>
  bool is() const
  {
    return std::holds_alternative<T>(v_);
  }

  template<class T>
  const T& as() const
  {
    return std::get<T>(v_);
  }

  //! Upper bound of the density on [0, 1].
  double sup() const
  {
    return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, density::Uniform>)
          return 1.0;
        else if constexpr (std::is_same_v<T, density::Linear>)
          return 2.0;
        else if constexpr (std::is_same_v<T, density::Cosine>)
          return 1.0 + d.a;
        else
          return 1.0 + d.amplitude();
      },
      v_);
  }

  //! Points in (0, 1) where the density is not smooth.
  std::vector<double> breakpoints() const
  {
    std::vector<double> pts;
    if (const auto* s = std::get_if<density::Sawtooth>(&v_)) {
      const int cells = 2 * s->N;
      pts.reserve(2 * cells);
      for (int k = 1; k <= cells; ++k) {
        pts.push_back(s->centre(k));
        if (k < cells)
          pts.push_back(static_cast<double>(k) / cells);
      }
      std::sort(pts.begin(), pts.end());
    }
    return pts;
  }

  //! Breakpoints at which the density behaves like |x - c|^beta.
  std::vector<double> cusps() const
  {
    std::vector<double> pts;
    if (const auto* s = std::get_if<density::Sawtooth>(&v_)) {
      if (s->beta != 1.0 && s->beta != 2.0)
        for (int k = 1; k <= 2 * s->N; ++k)
          pts.push_back(s->centre(k));
    }
    return pts;
  }

  //! Mini-grammar spec: uniform, linear, cosine:a=0.1, sawtooth:beta=1.5,L=1.
  std::string spec() const;

private:
  explicit TestDensity(Variant v)
    : v_(std::move(v))
  {}

  Variant v_;
};

inline double eval_density(const TestDensity& d, double x)
{
  detail::require(x >= 0.0 && x <= 1.0, "eval_density: x must lie in [0, 1]");
  return std::visit(
    [x](const auto& v) -> double {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, density::Uniform>) {
        return 1.0;
      } else if constexpr (std::is_same_v<T, density::Linear>) {
        return 2.0 * x;
      } else if constexpr (std::is_same_v<T, density::Cosine>) {
        return 1.0 + v.a * std::cos(2.0 * std::numbers::pi * x);
      } else {
        const int k = v.cell(x);
        const double dist = std::abs(x - v.centre(k));
        return 1.0 + v.L_beta * v.sign(k) *
                       (std::pow(4.0 * v.N, -v.beta) - std::pow(dist, v.beta));
      }
    },
    d.variant());
}

//! Exact derivative of the given order. Sawtooth supports order 1 only when
//! beta > 1; the smooth variants support every order.
inline double eval_derivative(const TestDensity& d, double x, int order)
{
  detail::require(x >= 0.0 && x <= 1.0, "eval_derivative: x must lie in [0, 1]");
  detail::require(order >= 0, "eval_derivative: order must be non-negative");
  if (order == 0)
    return eval_density(d, x);
  return std::visit(
    [x, order](const auto& v) -> double {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, density::Uniform>) {
        return 0.0;
      } else if constexpr (std::is_same_v<T, density::Linear>) {
        return order == 1 ? 2.0 : 0.0;
      } else if constexpr (std::is_same_v<T, density::Cosine>) {
        const double w = 2.0 * std::numbers::pi;
        const double scale = v.a * std::pow(w, order);
        switch (order % 4) {
          case 0:
            return scale * std::cos(w * x);
          case 1:
            return -scale * std::sin(w * x);
          case 2:
            return -scale * std::cos(w * x);
          default:
            return scale * std::sin(w * x);
        }
      } else {
        if (order > 1 || v.beta <= 1.0)
          throw std::domain_error(
            "eval_derivative: sawtooth is not differentiable to this order");
        const int k = v.cell(x);
        const double u = x - v.centre(k);
        if (u == 0.0)
          return 0.0;
        const double sgn = u > 0.0 ? 1.0 : -1.0;
        return -v.L_beta * v.sign(k) * v.beta * sgn *
               std::pow(std::abs(u), v.beta - 1.0);
      }
    },
    d.variant());
}

//! max over grid pairs x != y of |f^(m)(x) - f^(m)(y)| / |x - y|^(beta - m).
//! Membership in Sigma(beta, L) is (result <= L).
inline double holder_seminorm(const TestDensity& d,
                              const HolderClass& cls,
                              std::size_t grid_size)
{
  detail::require(grid_size >= 10, "holder_seminorm: grid_size must be >= 10");
  const int m = cls.m();
  const double exponent = cls.beta - m;
  const std::size_t g = grid_size;
  const double h = 1.0 / static_cast<double>(g - 1);

  std::vector<double> values(g);
  for (std::size_t i = 0; i < g; ++i)
    values[i] = eval_derivative(d, std::min(1.0, i * h), m);

  // lag_pow[l] = (l h)^exponent
  std::vector<double> inv_lag_pow(g);
  for (std::size_t l = 1; l < g; ++l)
    inv_lag_pow[l] = 1.0 / std::pow(static_cast<double>(l) * h, exponent);

  double best = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double vi = values[i];
    for (std::size_t j = i + 1; j < g; ++j)
      best = std::max(best, std::abs(values[j] - vi) * inv_lag_pow[j - i]);
  }
  return best;
}

//! n i.i.d. draws from d.
inline std::vector<double> sample(const TestDensity& d,
                                  std::size_t n,
                                  RandomStream& rng)
{
  detail::require(n >= 1, "sample: n must be >= 1");
  std::vector<double> out;
  out.reserve(n);
  const double envelope = d.sup();
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0;
    if (d.is<density::Uniform>()) {
      x = rng.uniform();
    } else if (d.is<density::Linear>()) {
      x = std::sqrt(rng.uniform());
    } else {
      for (;;) {
        x = rng.uniform();
        if (rng.uniform() * envelope <= eval_density(d, x))
          break;
      }
    }
    out.push_back(x);
  }
  return out;
}

namespace detail {

inline std::string shortest(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what)
{
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::invalid_argument("cannot parse " + what + ": '" + s + "'");
  return v;
}

} // namespace detail

inline std::string TestDensity::spec() const
{
  return std::visit(
    [](const auto& v) -> std::string {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, density::Uniform>)
        return "uniform";
      else if constexpr (std::is_same_v<T, density::Linear>)
        return "linear";
      else if constexpr (std::is_same_v<T, density::Cosine>)
        return "cosine:a=" + detail::shortest(v.a);
      else
        return "sawtooth:beta=" + detail::shortest(v.beta) +
               ",L=" + detail::shortest(v.L);
    },
    v_);
}

//! Parses the density mini-grammar. The sawtooth density takes its
//! bandwidth from the run, so b must be supplied for it.
inline TestDensity parse_density(const std::string& text, double b = NAN)
{
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::map<std::string, double> args;
  if (colon != std::string::npos) {
    std::string rest = text.substr(colon + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string item =
        rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                    : comma - pos);
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("density spec: expected key=value in '" +
                                    text + "'");
      const std::string key = item.substr(0, eq);
      args[key] = detail::parse_double(item.substr(eq + 1), key);
      if (comma == std::string::npos)
        break;
      pos = comma + 1;
    }
  }
  auto take = [&](const std::string& key) {
    const auto it = args.find(key);
    if (it == args.end())
      throw std::invalid_argument("density spec '" + text + "' needs " + key);
    const double v = it->second;
    args.erase(it);
    return v;
  };
  auto done = [&](TestDensity d) {
    if (!args.empty())
      throw std::invalid_argument("density spec '" + text +
                                  "' has unknown key " + args.begin()->first);
    return d;
  };
  if (name == "uniform")
    return done(TestDensity::uniform());
  if (name == "linear")
    return done(TestDensity::linear());
  if (name == "cosine")
    return done(TestDensity::cosine(take("a")));
  if (name == "sawtooth") {
    const double beta = take("beta");
    const double L = take("L");
    if (std::isnan(b))
      throw std::invalid_argument("sawtooth density needs the run bandwidth b");
    return done(TestDensity::sawtooth(beta, L, b));
  }
  throw std::invalid_argument("unknown density '" + name + "'");
}

} // namespace betakde
