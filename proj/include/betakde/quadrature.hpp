#pragma once

#include "kernel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace betakde {

//! Composite Simpson rule on [0, 1] used for every integral over t.
//!
//! The mesh is a list of panel edges; each panel contributes its two ends and
//! its midpoint. Away from features the panels have the uniform width of a
//! G-node Simpson rule. With a bandwidth the mesh is graded toward 0 and 1 so
//! that panel widths stay below (distance + b)/20, because boundary kernels
//! have width O(b) rather than O(sqrt(b)). Cusps of the integrand are graded
//! geometrically, plain edges are inserted as panel ends. refined() halves
//! every width, which is the convergence gate used by the experiments.
class Quadrature
{
public:
  static constexpr std::size_t default_min_nodes = 2001;

  //! Plain composite Simpson with G (odd, >= 3) uniform nodes.
  explicit Quadrature(std::size_t uniform_nodes)
    : Quadrature(uniform_nodes, 0.0, 1)
  {}

  //! G = max(min_nodes, nearest odd integer to 20/sqrt(b)), boundary graded.
  static Quadrature for_bandwidth(double b,
                                  std::size_t min_nodes = default_min_nodes)
  {
    detail::require(b > 0.0 && b < 1.0, "Quadrature: b must lie in (0, 1)");
    const double target = 20.0 / std::sqrt(b);
    auto odd = static_cast<std::size_t>(2.0 * std::floor(target / 2.0) + 1.0);
    if (std::abs(static_cast<double>(odd) + 2.0 - target) <
        std::abs(static_cast<double>(odd) - target))
      odd += 2;
    return Quadrature(std::max(odd, make_odd(min_nodes)), b, 1);
  }

  //! Same rule with extra panel edges and graded cusps.
  Quadrature with_features(std::span<const double> edges,
                           std::span<const double> cusps) const
  {
    Quadrature q = *this;
    q.splits_.clear();
    append_inside(q.edges_, edges);
    append_inside(q.cusps_, cusps);
    q.build();
    return q;
  }

  //! Splits the panels containing the given points, leaving all other
  //! nodes bit-identical.
  Quadrature split_at(std::span<const double> points) const
  {
    Quadrature q = *this;
    const double tiny = 1e-12 * q.panel_width();
    for (double x : points) {
      if (!(x > 0.0 && x < 1.0))
        continue;
      auto it = std::lower_bound(q.mesh_.begin(), q.mesh_.end(), x);
      if (it == q.mesh_.begin() || it == q.mesh_.end())
        continue;
      if (*it - x < tiny || x - *(it - 1) < tiny)
        continue;
      q.mesh_.insert(it, x);
      q.splits_.push_back(x);
    }
    q.assemble();
    return q;
  }

  Quadrature refined() const
  {
    Quadrature q = *this;
    q.uniform_nodes_ = 2 * uniform_nodes_ - 1;
    q.boundary_ratio_ = boundary_ratio_ / 2.0;
    q.cusp_ratio_ = cusp_ratio_ / 2.0;
    q.inner_refinement_ = 2 * inner_refinement_;
    q.edges_.insert(q.edges_.end(), splits_.begin(), splits_.end());
    q.splits_.clear();
    q.build();
    return q;
  }

  std::size_t uniform_nodes() const { return uniform_nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& panel_edges() const { return mesh_; }
  //! Subdivision factor for the kernel-adapted inner rule.
  int inner_refinement() const { return inner_refinement_; }

  //! sum_i w_i v_i for values sampled at nodes().
  double integrate(std::span<const double> values) const
  {
    if (values.size() != nodes_.size())
      throw std::invalid_argument("Quadrature: value count does not match");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      total += weights_[i] * values[i];
    return total;
  }

  template<class F>
  double integrate_fn(F&& f) const
  {
    double total = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      total += weights_[i] * f(nodes_[i]);
    return total;
  }

private:
  Quadrature(std::size_t uniform_nodes, double b, int inner_refinement)
    : uniform_nodes_(uniform_nodes)
    , b_(b)
    , inner_refinement_(inner_refinement)
  {
    if (uniform_nodes < 3 || uniform_nodes % 2 == 0)
      throw std::invalid_argument("Quadrature: node count must be odd and >= 3");
    build();
  }

  static std::size_t make_odd(std::size_t g) { return g % 2 == 1 ? g : g + 1; }

  static void append_inside(std::vector<double>& to, std::span<const double> from)
  {
    for (double x : from)
      if (x > 0.0 && x < 1.0)
        to.push_back(x);
    std::sort(to.begin(), to.end());
    to.erase(std::unique(to.begin(), to.end()), to.end());
  }

  double panel_width() const
  {
    return 2.0 / static_cast<double>(uniform_nodes_ - 1);
  }

  // Width allowed at distance d from a feature of the given kind.
  enum class Kind { plain, boundary, cusp };

  double graded_width(Kind kind, double d) const
  {
    switch (kind) {
      case Kind::boundary:
        return b_ > 0.0 ? boundary_ratio_ * (d + b_) : panel_width();
      case Kind::cusp:
        return std::max(1e-6 * panel_width(), cusp_ratio_ * d);
      case Kind::plain:
        break;
    }
    return panel_width();
  }

  // Offsets from a feature, graded until the uniform width or `limit`.
  std::vector<double> layer(Kind kind, double limit) const
  {
    std::vector<double> out;
    const double panel = panel_width();
    double pos = 0.0;
    for (;;) {
      const double width = graded_width(kind, pos);
      if (width >= panel || pos + width >= limit)
        break;
      pos += width;
      out.push_back(pos);
    }
    return out;
  }

  void build()
  {
    std::vector<std::pair<double, Kind>> features{ { 0.0, Kind::boundary } };
    std::vector<std::pair<double, Kind>> inner;
    for (double x : edges_)
      inner.emplace_back(x, Kind::plain);
    for (double x : cusps_)
      inner.emplace_back(x, Kind::cusp);
    std::sort(inner.begin(), inner.end(), [](const auto& l, const auto& r) {
      return l.first < r.first || (l.first == r.first && l.second > r.second);
    });
    for (const auto& f : inner)
      if (f.first > features.back().first)
        features.push_back(f);
    features.emplace_back(1.0, Kind::boundary);

    const double panel = panel_width();
    mesh_.assign(1, 0.0);
    for (std::size_t s = 0; s + 1 < features.size(); ++s) {
      const auto [u, ku] = features[s];
      const auto [v, kv] = features[s + 1];
      const double half = 0.5 * (v - u);
      const auto left = layer(ku, half);
      const auto right = layer(kv, half);
      for (double o : left)
        mesh_.push_back(u + o);
      const double a = left.empty() ? u : u + left.back();
      const double c = right.empty() ? v : v - right.back();
      const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil((c - a) / panel - 1e-9)));
      for (std::size_t i = 1; i < count; ++i)
        mesh_.push_back(a + (c - a) * static_cast<double>(i) /
                              static_cast<double>(count));
      if (!right.empty())
        mesh_.push_back(c);
      for (auto it = right.rbegin(); it != right.rend(); ++it)
        if (it != right.rbegin())
          mesh_.push_back(v - *it);
      mesh_.push_back(v);
    }
    assemble();
  }

  void assemble()
  {
    nodes_.assign(1, mesh_.front());
    weights_.assign(1, 0.0);
    for (std::size_t i = 0; i + 1 < mesh_.size(); ++i) {
      const double lo = mesh_[i];
      const double hi = mesh_[i + 1];
      const double w = hi - lo;
      weights_.back() += w / 6.0;
      nodes_.push_back(0.5 * (lo + hi));
      weights_.push_back(4.0 * w / 6.0);
      nodes_.push_back(hi);
      weights_.push_back(w / 6.0);
    }
  }

  std::size_t uniform_nodes_;
  double b_;
  double boundary_ratio_ = 1.0 / 20.0;
  double cusp_ratio_ = 1.0 / 16.0;
  int inner_refinement_;
  std::vector<double> edges_;
  std::vector<double> cusps_;
  std::vector<double> splits_;
  std::vector<double> mesh_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

//! Kernel-adapted Gauss-Legendre rule for integrals over x of
//! K_{t,b}(x)^power g(x).
//!
//! The x-range is cut at multiples of the kernel standard deviation around
//! the mode t, at 0 and 1, and at the breakpoints of g. Pieces that end at 0,
//! 1 or a cusp of g use the substitution x = a + w s^4, which turns the
//! algebraic endpoint behaviour into a smooth integrand.
class KernelIntegrator
{
public:
  KernelIntegrator(std::span<const double> breakpoints,
                   std::span<const double> cusps,
                   int refinement = 1)
    : breakpoints_(breakpoints.begin(), breakpoints.end())
    , cusps_(cusps.begin(), cusps.end())
    , refinement_(std::max(1, refinement))
  {}

  //! Returns { integral of K g, integral of K^2 g } in one pass.
  template<class G>
  std::pair<double, double> first_two(const BetaKernel& k, G&& g) const
  {
    double m1 = 0.0;
    double m2 = 0.0;
    for_each_node(k, [&](double x, double w) {
      const double log_k = k.log_evaluate(x);
      const double kv = std::exp(log_k);
      const double gv = g(x);
      m1 += w * kv * gv;
      m2 += w * kv * kv * gv;
    });
    return { m1, m2 };
  }

  template<class G>
  double integrate(const BetaKernel& k, G&& g, int power = 1) const
  {
    double total = 0.0;
    for_each_node(k, [&](double x, double w) {
      total += w * std::exp(power * k.log_evaluate(x)) * g(x);
    });
    return total;
  }

  //! Visits (x, weight) for every node of the rule built around k.
  template<class Visit>
  void for_each_node(const BetaKernel& k, Visit&& visit) const
  {
    using rule = boost::math::quadrature::gauss<double, 20>;
    const auto& abscissa = rule::abscissa();
    const auto& weight = rule::weights();

    std::vector<double> edges = window_edges(k);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double lo = edges[i];
      const double hi = edges[i + 1];
      if (!(hi > lo))
        continue;
      const bool sing_lo = is_singular(lo);
      const bool sing_hi = is_singular(hi);
      const double piece = (hi - lo) / refinement_;
      for (int r = 0; r < refinement_; ++r) {
        const double a = lo + piece * r;
        const double c = (r + 1 == refinement_) ? hi : lo + piece * (r + 1);
        const bool left = sing_lo && r == 0;
        const bool right = sing_hi && r + 1 == refinement_;
        if (left && right) {
          const double mid = 0.5 * (a + c);
          mapped_piece(a, mid, abscissa, weight, visit);
          mapped_piece(c, mid, abscissa, weight, visit);
        } else if (left) {
          mapped_piece(a, c, abscissa, weight, visit);
        } else if (right) {
          mapped_piece(c, a, abscissa, weight, visit);
        } else {
          plain_piece(a, c, abscissa, weight, visit);
        }
      }
    }
  }

private:
  std::vector<double> window_edges(const BetaKernel& k) const
  {
    static constexpr double offsets[] = { 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5,
                                          4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0,
                                          7.5, 8.0, 10.0, 13.0, 17.0, 22.0,
                                          28.0, 36.0, 46.0, 60.0 };
    const double t = k.t();
    const double sd = std::sqrt(kernel_variance(k));
    const double lo = std::max(0.0, t - 60.0 * sd);
    const double hi = std::min(1.0, t + 60.0 * sd);

    // soft edges too close to a singular point would leave it just outside
    // a plain piece, so they are dropped
    std::vector<double> anchors;
    if (lo == 0.0)
      anchors.push_back(0.0);
    for (auto it = std::lower_bound(cusps_.begin(), cusps_.end(), lo);
         it != cusps_.end() && *it <= hi; ++it)
      anchors.push_back(*it);
    if (hi == 1.0)
      anchors.push_back(1.0);
    const double keep_out = 0.25 * sd;
    auto clear_of_anchors = [&](double x) {
      const auto it = std::lower_bound(anchors.begin(), anchors.end(), x);
      if (it != anchors.end() && *it - x < keep_out)
        return false;
      return it == anchors.begin() || x - *(it - 1) >= keep_out;
    };

    std::vector<double> edges{ lo, hi };
    if (t > lo && t < hi && clear_of_anchors(t))
      edges.push_back(t);
    for (double o : offsets) {
      for (double x : { t - o * sd, t + o * sd })
        if (x > lo && x < hi && clear_of_anchors(x))
          edges.push_back(x);
    }
    const auto first = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), lo);
    for (auto it = first; it != breakpoints_.end() && *it < hi; ++it)
      if (*it > lo)
        edges.push_back(*it);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
  }

  bool is_singular(double x) const
  {
    if (x == 0.0 || x == 1.0)
      return true;
    return std::binary_search(cusps_.begin(), cusps_.end(), x);
  }

  template<class A, class W, class Visit>
  static void plain_piece(double a, double c, const A& abscissa, const W& weight,
                          Visit& visit)
  {
    const double half = 0.5 * (c - a);
    const double mid = 0.5 * (a + c);
    for (std::size_t j = 0; j < abscissa.size(); ++j) {
      const double dx = half * abscissa[j];
      if (abscissa[j] == 0.0) {
        visit(mid, half * weight[j]);
      } else {
        visit(mid - dx, half * weight[j]);
        visit(mid + dx, half * weight[j]);
      }
    }
  }

  // x = from + (to - from) s^4 for s in [0, 1]; the singular end is `from`.
  template<class A, class W, class Visit>
  static void mapped_piece(double from, double to, const A& abscissa,
                           const W& weight, Visit& visit)
  {
    const double w = to - from;
    auto emit = [&](double s, double gw) {
      const double s2 = s * s;
      const double x = from + w * s2 * s2;
      const double jac = 4.0 * std::abs(w) * s2 * s;
      visit(x, gw * jac);
    };
    for (std::size_t j = 0; j < abscissa.size(); ++j) {
      const double gw = 0.5 * weight[j];
      if (abscissa[j] == 0.0) {
        emit(0.5, gw);
      } else {
        emit(0.5 - 0.5 * abscissa[j], gw);
        emit(0.5 + 0.5 * abscissa[j], gw);
      }
    }
  }

  std::vector<double> breakpoints_;
  std::vector<double> cusps_;
  int refinement_;
};

} // namespace betakde
