#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hawkesmix/stats.hpp"

using namespace hawkesmix;

namespace {

HawkesModel exp1(double alpha, double beta) {
  Vector eta(1);
  eta << 1.0;
  return HawkesModel(eta, {{Kernel::exponential(alpha, beta)}});
}

HawkesModel poisson(double rate) {
  Vector eta(1);
  eta << rate;
  return HawkesModel(eta, {{Kernel::zero()}});
}

HawkesModel power_law2() {
  Vector eta(2);
  eta << 1.0, 1.0;
  const double a[2][2] = {{0.5, 0.3}, {0.2, 0.4}};
  std::vector<std::vector<Kernel>> k(2, std::vector<Kernel>(2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k[i][j] = Kernel::power_law(a[i][j], 1.0, 2.5);
  return HawkesModel(eta, k);
}

EventLog make_log(std::vector<double> ev, double horizon) {
  EventLog log;
  log.dim = 1;
  log.horizon = horizon;
  log.events = {std::move(ev)};
  return log;
}

}  // namespace

TEST(Stats, NormalCdf) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  EXPECT_NEAR(normal_cdf(-1.0), 0.15865525393145707, 1e-15);
}

TEST(Stats, KolmogorovDistribution) {
  // The two series agree where they switch.
  const double x = 1.18;
  double direct = 0.0;
  for (int k = 1; k < 50; ++k) direct += 2.0 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * x * x);
  EXPECT_NEAR(kolmogorov_survival(x - 1e-12), direct, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.3580986393225505), 0.05, 1e-9);
  EXPECT_NEAR(kolmogorov_survival(1.6276236115189504), 0.01, 1e-9);
  EXPECT_DOUBLE_EQ(kolmogorov_survival(0.0), 1.0);
  EXPECT_NEAR(ks_critical(1000) * std::sqrt(1000.0), 1.628, 5e-4);
}

TEST(Stats, KsOneSampleAtQuantiles) {
  // Points at the midpoint quantiles give D = 1 / (2n).
  const std::size_t n = 200;
  std::vector<double> x;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    x.push_back(0.5 * (lo + hi));
  }
  const auto r = ks_one_sample_normal(x);
  EXPECT_NEAR(r.statistic, 0.5 / n, 1e-12);
  EXPECT_GT(r.p_value, 0.999);
  for (double& v : x) v += 1.0;
  EXPECT_LT(ks_one_sample_normal(x).p_value, 1e-10);
}

TEST(Stats, KsTwoSample) {
  const std::vector<double> a = {1, 2, 3, 4};
  EXPECT_EQ(ks_two_sample(a, a).statistic, 0.0);
  EXPECT_EQ(ks_two_sample(a, {5, 6, 7}).statistic, 1.0);
  EXPECT_NEAR(ks_two_sample({1, 2}, {1.5, 3}).statistic, 0.5, 1e-15);
  std::mt19937_64 g(3);
  std::normal_distribution<double> z;
  std::vector<double> x(3000), y(3000);
  for (auto& v : x) v = z(g);
  for (auto& v : y) v = z(g);
  EXPECT_GT(ks_two_sample(x, y).p_value, 0.01);
}

TEST(Stats, StatisticDefinition) {
  const auto model = poisson(2.0);
  const auto log = make_log({0.5, 1.0, 3.0, 9.5}, 10.0);
  EXPECT_DOUBLE_EQ(statistic_ST(log, model, TestFunction::constant({1.0}), 10.0), 4.0 - 20.0);
  EXPECT_DOUBLE_EQ(statistic_ST(make_log({}, 10.0), model, TestFunction::constant({1.0}), 10.0), -20.0);
  const TestFunction ind({Indicator{0.75, 3.0, 2.0}});
  EXPECT_DOUBLE_EQ(statistic_ST(log, model, ind, 10.0), 2.0 * 2.0 - 2.0 * 2.0 * 2.25);
  const auto parts = partial_statistics(log, Vector::Constant(1, 2.0), TestFunction::constant({1.0}), {1.0, 3.0, 10.0});
  EXPECT_DOUBLE_EQ(parts[0], 2.0 - 2.0);
  EXPECT_DOUBLE_EQ(parts[1], 3.0 - 6.0);
  EXPECT_THROW((void)statistic_ST(log, model, ind, 11.0), DomainError);
}

TEST(Stats, IndicatorAdditivity) {
  const auto model = exp1(0.5, 1.0);
  const auto log = simulate_cluster(model, 50.0, 30.0, 11);
  const auto whole = statistic_ST(log, model, TestFunction({Indicator{2.0, 40.0}}), 50.0);
  const auto left = statistic_ST(log, model, TestFunction({Indicator{2.0, 17.3}}), 50.0);
  const auto right = statistic_ST(log, model, TestFunction({Indicator{17.3, 40.0}}), 50.0);
  EXPECT_NEAR(whole, left + right, 1e-12);
}

TEST(Stats, CenteringOracle) {
  const auto model = exp1(0.5, 1.0);
  const Vector m = mean_intensity(model);
  const auto f = TestFunction({TrigPeriodic{5.0, 1.0, {0.5}, {0.25}}});
  const int reps = 1000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto log = simulate_cluster(model, 100.0, default_burn_in(model), replicate_seed(5, r));
    const double x = partial_statistics(log, m, f, {100.0}).front();
    s += x;
    s2 += x * x;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  EXPECT_LT(std::abs(mean), 3.0 * se);
}

TEST(Stats, TimeChangePoissonIsLinear) {
  const auto model = poisson(3.0);
  const auto tc = time_change(model, TestFunction::constant({1.0}), 1000.0, {1e-9, 0.25, 0.5, 0.731, 1.0});
  EXPECT_DOUBLE_EQ(tc.sigma2_T, 3000.0);
  EXPECT_DOUBLE_EQ(tc.grid_step, 1.0);
  EXPECT_DOUBLE_EQ(tc.points[0].t, 1.0);
  EXPECT_DOUBLE_EQ(tc.points[1].t, 250.0);
  EXPECT_DOUBLE_EQ(tc.points[2].t, 500.0);
  EXPECT_DOUBLE_EQ(tc.points[3].t, 731.0);
  EXPECT_DOUBLE_EQ(tc.points[4].t, 1000.0);
}

TEST(Stats, TimeChangeHawkesMatchesClosedForm) {
  // Exponential kernel alpha = 0.5, rate 1: Var N(0, t] = 8 t - 12 (1 - e^{-t/2}).
  const auto model = exp1(0.5, 1.0);
  const double horizon = 2000.0;
  const std::vector<double> us = {0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
  const auto tc = time_change(model, TestFunction::constant({1.0}), horizon, us);
  auto var = [](double t) { return 8.0 * t - 12.0 * (1.0 - std::exp(-0.5 * t)); };
  EXPECT_NEAR(tc.sigma2_T / var(horizon), 1.0, 1e-6);
  for (const auto& p : tc.points) {
    // first grid point with var(t) >= u var(T)
    double t = tc.grid_step;
    while (var(t) < p.u * var(horizon) * (1 - 1e-12)) t += tc.grid_step;
    EXPECT_NEAR(p.t, t, 1e-9) << p.u;
    EXPECT_LE(std::abs(p.t - p.u * horizon), tc.grid_step + 1.5);
  }
  EXPECT_DOUBLE_EQ(tc.points.back().t, horizon);
  EXPECT_LT(tc.evaluations, 100u);
}

TEST(Stats, TimeChangeRejectsDecreasingVariance) {
  // Sign flip halfway: positive correlation makes sigma_t^2 fall after T/2.
  const auto model = exp1(0.5, 1.0);
  std::vector<double> us;
  for (int k = 1; k <= 20; ++k) us.push_back(0.05 * k);
  const TestFunction f({ConstPlusIndicator{1.0, 10.0, 20.0, -2.0}});
  EXPECT_THROW(time_change(model, f, 20.0, us, 0.02), NumericError);
}

TEST(Stats, VarianceLinearizationShrinks) {
  const auto model = exp1(0.5, 1.0);
  double prev = 1e300;
  for (double t : {100.0, 200.0, 400.0, 800.0}) {
    const double dev = std::abs(variance_ST(model, TestFunction::constant({1.0}), t) / t - 8.0);
    EXPECT_LT(dev, prev);
    prev = dev;
  }
}

TEST(Stats, HarnessPoissonControl) {
  const auto model = poisson(1.0);
  HarnessOptions opt;
  const auto rep = clt_harness(model, TestFunction::constant({1.0}), 2000.0, 1000, 77, opt);
  EXPECT_TRUE(rep.ks_pass) << rep.ks.statistic;
  EXPECT_TRUE(rep.cov_pass) << rep.cov_max_deviation;
  EXPECT_TRUE(rep.var_pass) << rep.var_w1;
  EXPECT_GE(rep.ks.p_value, 0.0);
  EXPECT_LE(rep.ks.p_value, 1.0);
  EXPECT_NEAR(rep.ks_critical, 0.0515, 1e-4);
  EXPECT_EQ(rep.cov.rows(), 10);
  EXPECT_LT((rep.cov - rep.cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.cov);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_DOUBLE_EQ(rep.time_change.points.back().t, 2000.0);
  for (std::size_t r = 0; r < rep.replicates; ++r) EXPECT_EQ(rep.z[r], rep.paths[r].back());
}

TEST(Stats, HarnessReproducible) {
  const auto model = exp1(0.5, 1.0);
  HarnessOptions one;
  one.threads = 1;
  HarnessOptions four = one;
  four.threads = 4;
  const auto f = TestFunction::constant({1.0});
  const auto a = clt_harness(model, f, 200.0, 40, 9, one);
  const auto b = clt_harness(model, f, 200.0, 40, 9, four);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.paths, b.paths);
  EXPECT_EQ(a.ks.statistic, b.ks.statistic);
  const auto c = clt_harness(model, f, 200.0, 40, 10, one);
  EXPECT_NE(a.z, c.z);
}

TEST(Stats, HarnessRefusesRateCondition) {
  const auto model = exp1(0.5, 1.0);
  HarnessOptions opt;
  opt.beta = 1.5;
  opt.delta = 2.0;
  try {
    (void)clt_harness(model, TestFunction::constant({1.0}), 100.0, 10, 1, opt);
    FAIL() << "expected refusal";
  } catch (const HypothesisError& e) {
    EXPECT_EQ(e.hypothesis(), kCltRate);
  }
  opt.beta = 2.0;
  opt.delta = 3.0;  // rate fine, but the power-law moment of order 3 is infinite
  EXPECT_THROW((void)clt_harness(power_law2(), TestFunction::constant({1.0, 1.0}), 100.0, 10, 1, opt),
               HypothesisError);
  opt.grid = {0.5};
  EXPECT_THROW((void)clt_harness(model, TestFunction::constant({1.0}), 100.0, 10, 1, opt), DomainError);
}

TEST(Stats, DecayPoissonIsFlat) {
  const auto model = poisson(2.0);
  const auto rep = mixing_decay_diagnostic(model, 0, 0, 1.0, {2.0, 5.0, 10.0}, 4000, 3);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.model, 0.0);
    EXPECT_EQ(row.bound, 0.0);
    EXPECT_LT(std::abs(row.empirical), 3.0 * row.se);
  }
}

TEST(Stats, DecayMatchesModelAndBound) {
  const auto model = power_law2();
  DecayOptions opt;
  opt.beta = 1.4;
  opt.gamma = 0.5;
  const auto rep = mixing_decay_diagnostic(model, 0, 1, 1.0, {5.0, 10.0, 20.0}, 3000, 8, opt);
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(std::isfinite(row.bound)) << row.lag;
    EXPECT_TRUE(row.within_bound()) << row.lag;
    EXPECT_LT(std::abs(row.z_model()), 4.0) << row.lag;
    EXPECT_GT(row.model, 0.0);
  }
  EXPECT_THROW((void)mixing_decay_diagnostic(model, 0, 1, 1.0, {1.0}, 10, 1), DomainError);
}

TEST(Stats, ModelCovarianceSlope) {
  Vector eta(1);
  eta << 1.0;
  const HawkesModel model(eta, {{Kernel::power_law(0.5, 1.0, 2.5)}});
  std::vector<double> lags;
  std::vector<Interval> bs;
  for (double t = 10.0; t <= 100.0; t *= 1.2589254117941673) {
    lags.push_back(t);
    bs.push_back({t, t + 1.0});
  }
  const auto cov = cov_counts_many(model, 0, 0, {0.0, 1.0}, bs);
  EXPECT_LE(log_log_slope(lags, cov.values), -(1.0 + 0.5) + 0.2);
  EXPECT_NEAR(log_log_slope({1, 2, 4}, {3, 12, 48}), 2.0, 1e-14);
}
