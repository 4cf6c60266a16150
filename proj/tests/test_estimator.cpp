#include <betakde/densities.hpp>
#include <betakde/estimator.hpp>
#include <betakde/quadrature.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace betakde;

namespace {

std::vector<double> uniform_grid(std::size_t g)
{
  std::vector<double> grid(g);
  for (std::size_t i = 0; i < g; ++i)
    grid[i] = static_cast<double>(i) / static_cast<double>(g - 1);
  return grid;
}

std::vector<double> draw(const TestDensity& d, std::size_t n, std::uint64_t seed)
{
  RandomStream rng(seed, 0);
  return sample(d, n, rng);
}

} // namespace

TEST(Sample, Validation)
{
  EXPECT_THROW(Sample({}), std::invalid_argument);
  EXPECT_THROW(Sample({ 0.5, 1.5 }), std::domain_error);
  EXPECT_THROW(Sample({ -0.1 }), std::domain_error);
  EXPECT_EQ(Sample({ 0.0, 1.0, 0.5 }).n(), 3u);
}

TEST(Fit, PreservesSampleAndBandwidth)
{
  const auto est = fit(Sample({ 0.1, 0.2, 0.3 }), 0.5);
  EXPECT_EQ(est.n(), 3u);
  EXPECT_EQ(est.b(), 0.5);
  EXPECT_THROW(fit(Sample({ 0.1 }), 0.0), std::domain_error);
  EXPECT_THROW(fit(Sample({ 0.1 }), 1.0), std::domain_error);
}

TEST(Evaluate, SinglePointIsTheKernel)
{
  const double b = 0.05;
  for (double x0 : { 0.0, 0.03, 0.5, 0.97, 1.0 }) {
    const auto est = fit(Sample({ x0 }), b);
    for (double t : { 0.0, 0.01, 0.4, 0.5, 0.99, 1.0 })
      EXPECT_NEAR(evaluate(est, t), evaluate(BetaKernel(t, b), x0),
                  1e-13 * std::max(1.0, evaluate(BetaKernel(t, b), x0)));
  }
}

TEST(Evaluate, DuplicatePointsMatchOnePoint)
{
  const auto one = fit(Sample({ 0.37 }), 0.02);
  const auto two = fit(Sample({ 0.37, 0.37 }), 0.02);
  for (double t : { 0.1, 0.37, 0.8 })
    EXPECT_DOUBLE_EQ(evaluate(one, t), evaluate(two, t));
}

TEST(Evaluate, Examples)
{
  EXPECT_NEAR(evaluate(fit(Sample({ 0.5 }), 0.5), 0.5), 1.5, 1e-14);
  const auto ends = fit(Sample({ 0.0, 1.0, 1.0, 0.0 }), 0.1);
  for (double t : { 1e-6, 0.3, 0.5, 1.0 - 1e-6 })
    EXPECT_EQ(evaluate(ends, t), 0.0);
  EXPECT_GT(evaluate(ends, 0.0), 0.0);
  EXPECT_GT(evaluate(ends, 1.0), 0.0);
  EXPECT_THROW(evaluate(ends, 1.1), std::domain_error);
}

TEST(Evaluate, NonNegative)
{
  const auto est = fit(Sample(draw(TestDensity::linear(), 300, 5)), 0.001);
  for (double v : evaluate_grid(est, uniform_grid(2001)))
    EXPECT_GE(v, 0.0);
}

TEST(Evaluate, UnbiasedUnderUniform)
{
  const std::size_t fits = 2000;
  std::vector<double> vals(fits);
  for (std::size_t r = 0; r < fits; ++r) {
    RandomStream rng(2024, r);
    vals[r] = evaluate(fit(Sample(sample(TestDensity::uniform(), 500, rng)), 0.01), 0.5);
  }
  double mean = 0.0, ss = 0.0;
  for (double v : vals)
    mean += v;
  mean /= fits;
  for (double v : vals)
    ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (fits - 1) / fits);
  EXPECT_LT(std::abs(mean - 1.0), 4.0 * se);
}

TEST(EvaluateGrid, MatchesPointwiseBitExactly)
{
  const auto est = fit(Sample(draw(TestDensity::cosine(0.5), 1000, 9)), 0.003);
  const auto grid = uniform_grid(501);
  const auto vals = evaluate_grid(est, grid);
  ASSERT_EQ(vals.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_EQ(vals[i], evaluate(est, grid[i]));
  const std::vector<double> single{ 0.42 };
  EXPECT_EQ(evaluate_grid(est, single).at(0), evaluate(est, 0.42));
}

TEST(EvaluateGrid, IndependentOfWorkerCount)
{
  const auto est = fit(Sample(draw(TestDensity::linear(), 2000, 3)), 0.001);
  const auto grid = uniform_grid(1001);
  EXPECT_EQ(evaluate_grid(est, grid, 1), evaluate_grid(est, grid, 3));
  EXPECT_EQ(evaluate_grid(est, grid, 1), evaluate_grid(est, grid, 8));
}

TEST(EvaluateGrid, ReversedSampleAgrees)
{
  auto pts = draw(TestDensity::linear(), 777, 11);
  const auto forward = fit(Sample(pts), 0.004);
  std::reverse(pts.begin(), pts.end());
  const auto backward = fit(Sample(pts), 0.004);
  const auto grid = uniform_grid(801);
  const auto a = evaluate_grid(forward, grid);
  const auto c = evaluate_grid(backward, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(a[i], c[i], 1e-12 * std::max(1.0, a[i]));
}

TEST(EvaluateGrid, LinearInTheEmpiricalMeasure)
{
  const auto x = draw(TestDensity::cosine(0.3), 400, 21);
  const auto y = draw(TestDensity::cosine(0.3), 400, 22);
  auto xy = x;
  xy.insert(xy.end(), y.begin(), y.end());
  const double b = 0.01;
  const auto grid = uniform_grid(301);
  const auto fx = evaluate_grid(fit(Sample(x), b), grid);
  const auto fy = evaluate_grid(fit(Sample(y), b), grid);
  const auto fxy = evaluate_grid(fit(Sample(xy), b), grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(fxy[i], 0.5 * (fx[i] + fy[i]), 1e-12 * std::max(1.0, fxy[i]));
}

TEST(EvaluateGrid, RejectsBadGrids)
{
  const auto est = fit(Sample({ 0.5 }), 0.1);
  const std::vector<double> unsorted{ 0.2, 0.1 };
  const std::vector<double> outside{ 0.2, 1.2 };
  EXPECT_THROW(evaluate_grid(est, unsorted), std::invalid_argument);
  EXPECT_THROW(evaluate_grid(est, outside), std::domain_error);
}

// Diagnostic only: the estimate is not a density in t, but its mass tends to 1.
TEST(EvaluateGrid, MassApproachesOneAsBandwidthShrinks)
{
  const auto pts = draw(TestDensity::cosine(0.2), 5000, 4);
  double err = 1.0;
  for (double b : { 0.1, 0.01, 0.001 }) {
    const auto est = fit(Sample(pts), b);
    const double mass =
      Quadrature::for_bandwidth(b).integrate_fn([&](double t) { return evaluate(est, t); });
    err = std::abs(mass - 1.0);
    RecordProperty("mass_error_b_" + std::to_string(b), std::to_string(err));
  }
  EXPECT_LT(err, 0.01);
}

TEST(TheoreticalBandwidth, Examples)
{
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(1024, 2.0), 0.0625);
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(32, 0.5), 0.03125);
  EXPECT_NEAR(theoretical_bandwidth(1000000, 2.0), std::pow(10.0, -2.4), 1e-17);
  EXPECT_NEAR(theoretical_bandwidth(1000000, 2.0), 0.00398, 1e-5);
  EXPECT_DOUBLE_EQ(theoretical_bandwidth(1024, 2.0, 0.5), 0.03125);
}

TEST(TheoreticalBandwidth, Errors)
{
  EXPECT_THROW(theoretical_bandwidth(1, 2.0), std::domain_error);
  EXPECT_THROW(theoretical_bandwidth(1024, 2.0, 20.0), std::domain_error);
  EXPECT_THROW(theoretical_bandwidth(0, 2.0), std::domain_error);
  EXPECT_THROW(theoretical_bandwidth(10, -1.0), std::domain_error);
}
