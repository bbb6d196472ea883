#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ntc/density.hpp"
#include "ntc/random.hpp"
#include "test_helpers.hpp"

namespace ntc {
namespace {

using testing::relative_error;

// Step sizes that turn repeated fit_step calls into a running average of the
// linearly binned batch histograms: new batch weight 1/k at the k-th call.
void fit_running_average(MarginalDensity& psi, const std::vector<std::vector<double>>& batches) {
  for (std::size_t k = 1; k <= batches.size(); ++k) {
    const double step = k == 1 ? 1e12 : 10.0 / static_cast<double>(k - 1);
    fit_step(psi, batches[k - 1], step);
  }
}

// Linear binning of the samples onto the grid, normalized (independent of fit_step).
std::vector<double> binned_histogram(const MarginalDensity& grid, const std::vector<double>& xs) {
  const auto n = grid.samples().size();
  std::vector<double> h(n, 0.0);
  for (double x : xs) {
    const double pos = (x - grid.left()) / grid.spacing();
    if (pos < 0 || pos > static_cast<double>(n - 1)) continue;
    const auto k = std::min(static_cast<std::size_t>(pos), n - 2);
    const double f = pos - static_cast<double>(k);
    h[k] += 1 - f;
    h[k + 1] += f;
  }
  double sum = 0;
  for (double v : h) sum += v;
  const double area = grid.spacing() * (sum - 0.5 * (h.front() + h.back()));
  for (double& v : h) v /= area;
  return h;
}

TEST(Density, EvalGridPointsInterpolationAndTails) {
  const MarginalDensity psi(0.0, {0.2, 0.6, 1.0, 0.4}, 0, 0.5);
  EXPECT_DOUBLE_EQ(psi.eval(0.5), 0.6);
  EXPECT_DOUBLE_EQ(psi.eval(1.0), 1.0);
  EXPECT_DOUBLE_EQ(psi.eval(0.25), 0.4);
  EXPECT_DOUBLE_EQ(psi.eval(1.25), 0.7);
  EXPECT_EQ(psi.eval(-0.01), kDensityFloor);
  EXPECT_EQ(psi.eval(1.6), kDensityFloor);
  EXPECT_DOUBLE_EQ(psi.eval(1.5), 0.4);
}

TEST(Density, UniformLogLikelihood) {
  const MarginalDensity psi(-5.0, std::vector<double>(101, 0.1));
  EXPECT_NEAR(psi.integral(), 1.0, 1e-12);
  const auto l = log2_likelihood_and_grads(psi, 1.234);
  EXPECT_NEAR(l.value, std::log2(0.1), 1e-12);
  EXPECT_NEAR(l.value, -3.3219, 1e-4);
  EXPECT_EQ(l.d_dt, 0.0);
}

TEST(Density, LogLikelihoodFiniteDifferences) {
  Rng rng(3);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30);
    for (double& v : s) v = rng.uniform(0.05, 1.0);
    MarginalDensity psi(-1.5, s);
    // Stay away from grid points, where the slope is discontinuous.
    double t = rng.uniform(-1.45, 1.35);
    const double frac = (t + 1.5) / 0.1 - std::floor((t + 1.5) / 0.1);
    if (frac < 0.01 || frac > 0.99) continue;
    const auto l = log2_likelihood_and_grads(psi, t);
    const double h = 1e-6;
    const double fd_t =
        (std::log2(psi.eval(t + h)) - std::log2(psi.eval(t - h))) / (2 * h);
    worst = std::max(worst, relative_error(l.d_dt, fd_t, 1e-6));
    for (std::size_t idx : {l.index, l.index + 1}) {
      auto& v = psi.samples()[idx];
      const double saved = v;
      v = saved + h;
      const double fp = std::log2(psi.eval(t));
      v = saved - h;
      const double fm = std::log2(psi.eval(t));
      v = saved;
      const double analytic = idx == l.index ? l.d_lower : l.d_upper;
      worst = std::max(worst, relative_error(analytic, (fp - fm) / (2 * h), 1e-6));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Density, ZeroSlopeSegmentHasZeroDerivative) {
  const MarginalDensity psi(0.0, {0.5, 0.5, 1.5}, 0, 1.0);
  EXPECT_EQ(log2_likelihood_and_grads(psi, 0.5).d_dt, 0.0);
  EXPECT_GT(log2_likelihood_and_grads(psi, 1.5).d_dt, 0.0);
}

TEST(FitStep, EmptyBatchOnlyRenormalizes) {
  MarginalDensity psi(0.0, {1.0, 2.0, 3.0}, 0, 1.0);
  const auto before = psi.samples();
  fit_step(psi, {}, 0.5);
  const double area = 1.0 * (6.0 - 2.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(psi.samples()[i], before[i] / area);
  EXPECT_THROW(fit_step(psi, {}, 0.0), ParameterError);
}

TEST(FitStep, IntegralStaysOne) {
  Rng rng(2);
  MarginalDensity psi = MarginalDensity::uniform(-4, 4);
  for (int step = 0; step < 200; ++step) {
    std::vector<double> batch(64);
    for (double& v : batch) v = rng.normal() * 1.5;
    fit_step(psi, batch, rng.uniform(0.1, 5.0),
             step % 2 ? DensityObjective::likelihood : DensityObjective::log_likelihood);
    EXPECT_NEAR(psi.integral(), 1.0, 1e-9);
    for (double s : psi.samples()) EXPECT_GE(s, 0.0);
  }
}

TEST(FitStep, UniformNoiseConcentratesOnZero) {
  Rng rng(5);
  MarginalDensity psi = MarginalDensity::uniform(-3, 3);
  std::vector<std::vector<double>> batches(200, std::vector<double>(500));
  std::vector<double> all;
  for (auto& b : batches)
    for (double& v : b) {
      v = rng.uniform() - 0.5;
      all.push_back(v);
    }
  fit_running_average(psi, batches);
  const auto oracle = binned_histogram(psi, all);
  for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(psi.samples()[i], oracle[i], 1e-6);
  const auto pmf = discretize(psi);
  EXPECT_GE(pmf.prob(0), 0.99);
  EXPECT_EQ(pmf.mode, 0);
}

TEST(FitStep, ConstantStepConvergesToRelaxedDensity) {
  // y ~ Laplace(1.5), y~ = y + U(-1/2, 1/2); true density of y~ in closed form.
  const double b = 1.5;
  auto cdf = [b](double x) { return x < 0 ? 0.5 * std::exp(x / b) : 1 - 0.5 * std::exp(-x / b); };
  auto relaxed = [&](double t) { return cdf(t + 0.5) - cdf(t - 0.5); };
  Rng rng(9);
  MarginalDensity psi = MarginalDensity::uniform(-15, 15);
  std::vector<std::vector<double>> batches(400, std::vector<double>(500));
  for (auto& batch : batches)
    for (double& v : batch) v = rng.laplace(b) + rng.uniform() - 0.5;
  fit_running_average(psi, batches);
  double l1 = 0;
  for (std::size_t k = 0; k < psi.samples().size(); ++k)
    l1 += std::abs(psi.samples()[k] - relaxed(psi.left() + psi.spacing() * static_cast<double>(k))) *
          psi.spacing();
  EXPECT_LT(l1, 0.05);
}

TEST(AdaptRange, IdenticalRangeKeepsDensity) {
  MarginalDensity psi(-3.0, std::vector<double>(61, 0.0));
  for (std::size_t k = 0; k < 61; ++k) psi.samples()[k] = 1.0 + std::sin(0.1 * static_cast<double>(k));
  psi.renormalize();
  const auto same = adapt_range(psi, -2.0, 2.0);
  ASSERT_EQ(same.samples().size(), psi.samples().size());
  EXPECT_NEAR(same.left(), psi.left(), 1e-12);
  for (std::size_t k = 0; k < 61; ++k) EXPECT_NEAR(same.samples()[k], psi.samples()[k], 1e-12);
}

TEST(AdaptRange, WideningPreservesInteriorValues) {
  MarginalDensity psi(-2.0, std::vector<double>(41, 0.0));
  for (std::size_t k = 0; k < 41; ++k) psi.samples()[k] = std::exp(-4.0 * std::pow(0.1 * static_cast<double>(k) - 2.0, 2));
  psi.renormalize();
  const auto wide = adapt_range(psi, -6.0, 7.0);
  EXPECT_NEAR(wide.left(), -7.0, 1e-12);
  EXPECT_NEAR(wide.right(), 8.0, 1e-12);
  // Mass outside the old grid is only the floor, so the scale barely moves.
  const double rescale = wide.eval(0.0) / psi.eval(0.0);
  EXPECT_NEAR(rescale, 1.0, 1e-6);
  for (std::size_t k = 0; k < 41; ++k) {
    const double t = -2.0 + 0.1 * static_cast<double>(k);
    EXPECT_NEAR(wide.eval(t), psi.samples()[k] * rescale, 1e-12);
  }
}

TEST(AdaptRange, ShrinkingDoesNotClipMass) {
  Rng rng(4);
  MarginalDensity psi = MarginalDensity::uniform(-20, 20);
  double lo = 1e9, hi = -1e9;
  std::vector<std::vector<double>> batches(100, std::vector<double>(500));
  for (auto& batch : batches)
    for (double& v : batch) {
      v = rng.normal() + rng.uniform() - 0.5;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  fit_running_average(psi, batches);
  const auto narrow = adapt_range(psi, lo, hi);
  EXPECT_LT(narrow.samples().size(), psi.samples().size());
  // Mass of psi falling outside the new grid.
  double outside = 0;
  for (std::size_t k = 0; k + 1 < psi.samples().size(); ++k) {
    const double t = psi.left() + psi.spacing() * (static_cast<double>(k) + 0.5);
    if (t < narrow.left() || t > narrow.right())
      outside += 0.5 * (psi.samples()[k] + psi.samples()[k + 1]) * psi.spacing();
  }
  EXPECT_LT(outside, 1e-6);
  EXPECT_NEAR(narrow.integral(), 1.0, 1e-9);
}

TEST(Discretize, UniformOverElevenIntegers) {
  const MarginalDensity psi(-5.05, std::vector<double>(102, 0.1));
  const auto pmf = discretize(psi);
  EXPECT_EQ(pmf.q_min, -5);
  EXPECT_EQ(pmf.q_max, 5);
  ASSERT_EQ(pmf.size(), 11u);
  for (double p : pmf.probs) EXPECT_NEAR(p, 1.0 / 11.0, 1e-12);
  EXPECT_EQ(pmf.mode, -5);  // ties go to the smaller integer
  EXPECT_NEAR(pmf_entropy(pmf), std::log2(11.0), 1e-12);
}

TEST(Discretize, TriangularModeAtZero) {
  std::vector<double> s(41);
  for (std::size_t k = 0; k < 41; ++k) s[k] = 2.0 - std::abs(0.1 * static_cast<double>(k) - 2.0);
  MarginalDensity psi(-2.0, s);
  psi.renormalize();
  const auto pmf = discretize(psi);
  EXPECT_EQ(pmf.mode, 0);
  double total = 0;
  for (double p : pmf.probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Discretize, MatchesDensityAtIntegersUpToOneFactor) {
  Rng rng(1);
  std::vector<double> s(81);
  for (double& v : s) v = rng.uniform(0.1, 1.0);
  MarginalDensity psi(-4.0, s);
  psi.renormalize();
  const auto pmf = discretize(psi);
  const double factor = pmf.prob(0) / psi.eval(0.0);
  for (std::int32_t n = pmf.q_min; n <= pmf.q_max; ++n)
    EXPECT_NEAR(pmf.prob(n), psi.eval(n) * factor, 1e-12);
}

TEST(Discretize, NoIntegerSupportIsConfigError) {
  const MarginalDensity psi(0.1, std::vector<double>(5, 1.0));
  EXPECT_THROW(discretize(psi), ConfigError);
}

TEST(PmfEntropy, KnownValues) {
  DiscretePmf uniform8{0, 7, std::vector<double>(8, 0.125), 0};
  EXPECT_DOUBLE_EQ(pmf_entropy(uniform8), 3.0);
  DiscretePmf point{0, 0, {1.0}, 0};
  EXPECT_EQ(pmf_entropy(point), 0.0);
}

TEST(DifferentialEntropy, MatchesClosedFormForUniform) {
  // Uniform on an interval of width 4: 2 bits.
  MarginalDensity psi(0.0, std::vector<double>(41, 0.25));
  EXPECT_NEAR(differential_entropy(psi), 2.0, 1e-12);
}

// Bias between differential and discrete entropy shrinks as the source
// widens relative to the unit bin.
TEST(Density, EntropyBiasShrinksWithScale) {
  Rng rng(12);
  double previous = 1e9;
  for (double scale : {0.25, 0.5, 1.0, 2.0}) {
    MarginalDensity psi = MarginalDensity::uniform(-12 * scale - 2, 12 * scale + 2);
    std::vector<std::vector<double>> batches(200, std::vector<double>(1000));
    for (auto& batch : batches)
      for (double& v : batch) v = rng.laplace(scale) + rng.uniform() - 0.5;
    fit_running_average(psi, batches);
    const double gap = std::abs(differential_entropy(psi) - pmf_entropy(discretize(psi)));
    EXPECT_LT(gap, previous) << "scale " << scale;
    previous = gap;
  }
}

}  // namespace
}  // namespace ntc
