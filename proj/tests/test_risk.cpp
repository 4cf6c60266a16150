#include <betakde/risk.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

using namespace betakde;

namespace {

struct WorkerOverride
{
  explicit WorkerOverride(const char* value) { ::setenv(workers_env, value, 1); }
  ~WorkerOverride() { ::unsetenv(workers_env); }
};

double linear_bias(double t, double b)
{
  return 2.0 * b * (1.0 - 2.0 * t) / (1.0 + 2.0 * b);
}

} // namespace

TEST(BiasAt, Examples)
{
  const auto uniform = TestDensity::uniform();
  const auto linear = TestDensity::linear();
  for (double b : { 0.5, 0.01, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    for (double t : { 0.0, 1e-6, 0.1, 0.5, 0.77, 1.0 }) {
      EXPECT_NEAR(bias_at(uniform, b, t, q), 0.0, 1e-6);
      EXPECT_NEAR(bias_at(linear, b, t, q), linear_bias(t, b), 1e-6);
    }
    EXPECT_NEAR(bias_at(linear, b, 0.5, q), 0.0, 1e-12);
  }
}

TEST(VarianceAt, UniformMatchesAb)
{
  for (double b : { 0.5, 0.01, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    for (double t : { 0.0, 0.2, 0.5, 0.9 }) {
      const double a = a_b(t, b);
      EXPECT_NEAR(variance_at(TestDensity::uniform(), b, 100, t, q), (a - 1.0) / 100.0,
                  1e-6 * a / 100.0);
    }
  }
  const auto q = Quadrature::for_bandwidth(0.5);
  EXPECT_NEAR(variance_at(TestDensity::uniform(), 0.5, 10, 0.5, q), 0.02, 1e-12);
}

TEST(VarianceAt, HalvesWithDoubledN)
{
  const auto q = Quadrature::for_bandwidth(0.01);
  for (const auto& d : { TestDensity::linear(), TestDensity::cosine(0.3) })
    for (double t : { 0.05, 0.5 })
      EXPECT_DOUBLE_EQ(variance_at(d, 0.01, 2000, t, q),
                       variance_at(d, 0.01, 1000, t, q) / 2.0);
  EXPECT_THROW(variance_at(TestDensity::uniform(), 0.01, 0, 0.5, q), std::domain_error);
}

TEST(IntegratedBias, Examples)
{
  for (double b : { 1e-2, 1e-3, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    EXPECT_NEAR(integrated_bias(TestDensity::uniform(), b, 2.0, q), 0.0, 1e-6);
    EXPECT_NEAR(integrated_bias(TestDensity::linear(), b, 1.0, q), b / (1.0 + 2.0 * b), 1e-6);
    EXPECT_NEAR(integrated_bias(TestDensity::linear(), b, 2.0, q),
                std::sqrt(4.0 * b * b / (3.0 * (1.0 + 2.0 * b) * (1.0 + 2.0 * b))), 1e-6);
  }
  EXPECT_THROW(integrated_bias(TestDensity::linear(), 0.01, 0.5, Quadrature(11)),
               std::domain_error);
}

TEST(IntegratedBias, LinearClosedFormsToRelativePrecision)
{
  for (double b : { 1e-2, 1e-3, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    const double p1 = b / (1.0 + 2.0 * b);
    const double p3 = 2.0 * b / (1.0 + 2.0 * b) * std::pow(4.0, -1.0 / 3.0);
    EXPECT_NEAR(integrated_bias(TestDensity::linear(), b, 1.0, q), p1, 1e-9 * p1);
    EXPECT_NEAR(integrated_bias(TestDensity::linear(), b, 3.0, q), p3, 1e-9 * p3);
  }
}

TEST(IntegratedBias, CosineTracksBandwidth)
{
  std::vector<double> ratios;
  for (double b : { 1e-2, 1e-3, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    const auto d = TestDensity::cosine(0.1);
    double sup = 0.0;
    for (double t : q.nodes())
      if (static_cast<std::size_t>(t * 1e4) % 97 == 0)
        sup = std::max(sup, std::abs(bias_at(d, b, t, q)));
    ratios.push_back(sup / b);
    const double slope =
      std::log(integrated_bias(d, b, 2.0, q) / integrated_bias(d, 10.0 * b, 2.0, q)) /
      std::log(0.1);
    if (b < 1e-2)
      EXPECT_NEAR(slope, 1.0, 0.05) << b;
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LT(*hi / *lo, 1.2);
}

TEST(IntegratedVarianceTerm, ScalesWithN)
{
  const auto q = Quadrature::for_bandwidth(1e-3);
  for (double p : { 1.0, 2.0, 3.0, 4.0 }) {
    const double v1 = integrated_variance_term(TestDensity::linear(), 1e-3, 1000, p, q);
    const double v2 = integrated_variance_term(TestDensity::linear(), 1e-3, 2000, p, q);
    EXPECT_NEAR(v2, v1 / std::pow(2.0, p / 2.0), 1e-10 * v2) << p;
  }
}

TEST(IntegratedVarianceTerm, UniformP2IsTheIntegralOfAb)
{
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double b : { 1e-2, 1e-3 }) {
    const auto q = Quadrature::for_bandwidth(b);
    const double oracle =
      (ts.integrate([b](double t) { return a_b(t, b); }, 0.0, 1.0, 1e-13) - 1.0) / 500.0;
    EXPECT_NEAR(integrated_variance_term(TestDensity::uniform(), b, 500, 2.0, q), oracle,
                1e-7 * oracle);
  }
}

TEST(IntegratedVarianceTerm, VarianceRateIsBoundedBelowFour)
{
  const std::size_t n = 10000;
  for (double p : { 1.0, 2.0, 3.0 }) {
    std::vector<double> normalized;
    for (double b : { 1e-2, 1e-3, 1e-4 }) {
      const auto q = Quadrature::for_bandwidth(b);
      normalized.push_back(
        std::pow(integrated_variance_term(TestDensity::uniform(), b, n, p, q), 1.0 / p) *
        std::sqrt(n * std::sqrt(b)));
    }
    for (double v : normalized) {
      EXPECT_GT(v, 0.5);
      EXPECT_LT(v, 1.5);
    }
  }
}

TEST(IntegratedVarianceTerm, FourthPowerTracksDn)
{
  const std::size_t n = 10000;
  double previous = 0.0;
  for (double b : { 1e-2, 1e-3, 1e-4 }) {
    const auto q = Quadrature::for_bandwidth(b);
    const double raw = integrated_variance_term(TestDensity::uniform(), b, n, 4.0, q) *
                       std::pow(n * std::sqrt(b), 2.0);
    if (previous > 0.0)
      EXPECT_GT(raw, previous);
    previous = raw;
    const double ratio = raw / dn(b, 4.0);
    EXPECT_GT(ratio, 0.15);
    EXPECT_LT(ratio, 0.25);
  }
}

TEST(Dn, Examples)
{
  EXPECT_NEAR(dn(0.005, 4.0), std::log(100.0), 1e-12);
  EXPECT_NEAR(dn(0.005, 4.0), 4.605170186, 1e-9);
  EXPECT_EQ(dn(0.5, 4.0), 0.0);
  EXPECT_EQ(dn(0.7, 2.0), 0.0);
  EXPECT_NEAR(dn(0.25, 2.0), 2.0 * (std::sqrt(0.5) - 0.5), 1e-15);
  EXPECT_NEAR(dn(0.25, 2.0), 0.414213562, 1e-9);
  for (double b : { 1e-2, 1e-5 })
    EXPECT_NEAR(dn(b, 4.0), std::log(1.0 / (2.0 * b)), 1e-12);
  EXPECT_THROW(dn(0.0, 4.0), std::domain_error);
  EXPECT_THROW(dn(0.1, 0.5), std::domain_error);
}

TEST(Dn, MatchesNumericalIntegral)
{
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double p : { 1.0, 3.0, 4.0, 6.0 })
    for (double b : { 0.3, 1e-3 }) {
      const double oracle =
        ts.integrate([p](double t) { return std::pow(1.0 - t, -p / 4.0); }, 0.5, 1.0 - b);
      EXPECT_NEAR(dn(b, p), oracle, 1e-10 * std::max(1.0, oracle));
    }
}

TEST(MomentUpperBound, Examples)
{
  EXPECT_DOUBLE_EQ(moment_upper_bound(1.0, 0.0, 100, 2.0), 0.01);
  EXPECT_DOUBLE_EQ(moment_upper_bound(1.0, 1.0, 10, 4.0), 0.011);
  EXPECT_DOUBLE_EQ(moment_upper_bound(4.0, 7.0, 4, 1.0), 1.0);
  EXPECT_THROW(moment_upper_bound(-1.0, 1.0, 10, 2.0), std::domain_error);
}

TEST(SecondMoment, MatchesVarianceUnderUniform)
{
  const double b = 0.01;
  const auto q = Quadrature::for_bandwidth(b);
  for (double t : { 0.25, 0.5 }) {
    const auto m = mc_centered_second_moment(TestDensity::uniform(), b, 500, t, 1.0, 1000, 17);
    const double exact = variance_at(TestDensity::uniform(), b, 500, t, q);
    EXPECT_LT(std::abs(m.value - exact), 4.0 * m.std_error) << t;
  }
}

TEST(McRisk, DeterministicForFixedSeed)
{
  const auto q = Quadrature::for_bandwidth(0.02);
  const auto d = TestDensity::cosine(0.1);
  const auto a = mc_risk(d, 0.02, 200, 2.0, 2, 5, q);
  const auto b = mc_risk(d, 0.02, 200, 2.0, 2, 5, q);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  EXPECT_EQ(a.loss_stderr, b.loss_stderr);
  EXPECT_EQ(a.reps, 2u);
  EXPECT_NE(mc_risk(d, 0.02, 200, 2.0, 2, 6, q).value, a.value);
}

TEST(McRisk, IndependentOfWorkerCount)
{
  const auto q = Quadrature::for_bandwidth(0.02);
  const auto d = TestDensity::linear();
  RiskEstimate one, three;
  {
    WorkerOverride w("1");
    one = mc_risk(d, 0.02, 300, 3.0, 12, 99, q);
  }
  {
    WorkerOverride w("3");
    three = mc_risk(d, 0.02, 300, 3.0, 12, 99, q);
  }
  EXPECT_EQ(one.value, three.value);
  EXPECT_EQ(one.std_error, three.std_error);
}

TEST(McRisk, UniformMatchesExactVariance)
{
  const double b = 0.01;
  const auto q = Quadrature::for_bandwidth(b);
  const auto r = mc_risk(TestDensity::uniform(), b, 1000, 2.0, 200, 3, q);
  const double exact = integrated_variance_term(TestDensity::uniform(), b, 1000, 2.0, q);
  EXPECT_LT(std::abs(r.mean_loss - exact), 4.0 * r.loss_stderr);
  EXPECT_NEAR(r.std_error, r.loss_stderr / (2.0 * r.value), 1e-15);
}

TEST(McRisk, DecreasesWithN)
{
  const double b = 0.01;
  const auto q = Quadrature::for_bandwidth(b);
  double previous = 1e300, previous_se = 0.0;
  for (std::size_t n : { 100, 1000, 10000 }) {
    const auto r = mc_risk(TestDensity::uniform(), b, n, 2.0, 10, 8, q);
    EXPECT_LT(r.value, previous + 2.0 * (r.std_error + previous_se));
    previous = r.value;
    previous_se = r.std_error;
  }
}

TEST(McRisk, Validation)
{
  const Quadrature q(101);
  EXPECT_THROW(mc_risk(TestDensity::uniform(), 0.1, 10, 2.0, 1, 0, q), std::domain_error);
  EXPECT_THROW(mc_risk(TestDensity::uniform(), 0.1, 0, 2.0, 5, 0, q), std::domain_error);
  EXPECT_THROW(mc_risk(TestDensity::uniform(), 1.0, 10, 2.0, 5, 0, q), std::domain_error);
}

TEST(LowerBound, HoldsForLinearAndUniform)
{
  const double b = 0.01;
  const std::size_t n = 1000;
  const auto q = Quadrature::for_bandwidth(b);
  for (const auto& d : { TestDensity::linear(), TestDensity::uniform() }) {
    const auto mc = mc_risk(d, b, n, 2.0, 50, 12, q);
    const auto r = lower_bound_check(d, b, n, 2.0, mc, q);
    EXPECT_TRUE(r.bias_holds) << d.spec() << " " << r.bias_margin;
    EXPECT_TRUE(r.variance_holds) << d.spec() << " " << r.variance_margin;
    EXPECT_DOUBLE_EQ(r.risk_pth, mc.mean_loss + 4.0 * mc.loss_stderr);
    if (d.is<density::Uniform>())
      EXPECT_NEAR(r.bias_bound, 0.0, 1e-12);
  }
}
