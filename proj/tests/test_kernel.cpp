#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "hawkesmix/kernel.hpp"
#include "hawkesmix/quadrature.hpp"

using hawkesmix::Kernel;
namespace quad = hawkesmix::quad;

namespace {

// Direct quadrature of int_0^X e^{-2 pi i xi t} h(t) dt on panels resolving
// the oscillation, plus the analytic power-law tail beyond X (bounded by the
// remaining mass).
std::complex<double> direct_fourier(const Kernel& k, double xi, double x_max) {
  const double period = 1.0 / std::abs(xi);
  const auto panels = static_cast<std::size_t>(std::ceil(x_max / period) * 4);
  auto f = [&](double t) {
    return std::polar(k.evaluate(t), -2.0 * std::numbers::pi * xi * t);
  };
  quad::AdaptiveOptions opt;
  opt.initial_panels = panels;
  opt.abs_tol = 1e-13;
  opt.rel_tol = 1e-12;
  opt.max_panels = 5000000;
  return quad::adaptive(f, 0.0, x_max, opt).value;
}

}  // namespace

TEST(Kernel, ExponentialValues) {
  const Kernel k = Kernel::exponential(0.5, 2.0);
  EXPECT_DOUBLE_EQ(k.evaluate(0.0), 1.0);
  EXPECT_NEAR(k.evaluate(1.0), std::exp(-2.0), 1e-15);
  EXPECT_DOUBLE_EQ(k.l1_norm(), 0.5);
  EXPECT_EQ(k.family_name(), "exponential");
}

TEST(Kernel, UniformValues) {
  const Kernel k = Kernel::uniform(0.5, 2.0);
  EXPECT_DOUBLE_EQ(k.evaluate(1.0), 0.25);
  EXPECT_DOUBLE_EQ(k.evaluate(2.5), 0.0);
  EXPECT_DOUBLE_EQ(k.moment(1.0), 1.0);
}

TEST(Kernel, RejectsBadInput) {
  EXPECT_THROW(Kernel::exponential(-0.1, 1.0), hawkesmix::DomainError);
  EXPECT_THROW(Kernel::exponential(0.5, 0.0), hawkesmix::DomainError);
  EXPECT_THROW(Kernel::power_law(0.5, 1.0, 1.0), hawkesmix::DomainError);
  EXPECT_THROW(Kernel::uniform(0.5, -1.0), hawkesmix::DomainError);
  EXPECT_THROW((void)Kernel::exponential(0.5, 1.0).evaluate(-1e-9), hawkesmix::DomainError);
}

TEST(Kernel, ExponentialMomentsAndFourier) {
  const Kernel k = Kernel::exponential(0.5, 1.0);
  EXPECT_NEAR(k.moment(2.0), 2.0, 1e-12);
  EXPECT_NEAR(k.moment(1.0), 1.0, 1e-12);
  // alpha beta / (beta + 2 pi i xi) at 2 pi xi = 1
  const auto f = k.fourier(1.0 / (2.0 * std::numbers::pi));
  EXPECT_NEAR(f.real(), 0.25, 1e-14);
  EXPECT_NEAR(f.imag(), -0.25, 1e-14);
}

TEST(Kernel, MassMatchesQuadrature) {
  for (const Kernel& k : {Kernel::exponential(0.7, 3.0), Kernel::uniform(0.4, 1.5)}) {
    quad::AdaptiveOptions opt;
    opt.initial_panels = 8;
    const double mass = quad::adaptive([&](double t) { return k.evaluate(t); }, 0.0, 60.0, opt).value;
    EXPECT_NEAR(mass, k.l1_norm(), 1e-10) << k.family_name();
  }
  // Power law: integrate after the substitution t = c (w^{-1/theta} - 1).
  const Kernel p = Kernel::power_law(0.6, 2.0, 2.5);
  auto g = [&](double w) {
    const double t = 2.0 * (std::pow(w, -1.0 / 2.5) - 1.0);
    const double dt = 2.0 / 2.5 * std::pow(w, -1.0 / 2.5 - 1.0);
    return p.evaluate(t) * dt;
  };
  EXPECT_NEAR(quad::adaptive(g, 1e-300, 1.0).value, 0.6, 1e-9);
}

TEST(Kernel, PowerLawMomentMatchesQuadrature) {
  const Kernel p = Kernel::power_law(1.0, 1.5, 2.5);
  for (double order : {0.5, 1.0, 1.4, 2.0}) {
    // int_0^inf t^p h(t) dt / alpha, split at 1 and mapped t = 1/s on the tail.
    auto near = [&](double t) { return std::pow(t, order) * p.evaluate(t); };
    auto far = [&](double s) {
      const double t = 1.0 / s;
      return std::pow(t, order) * p.evaluate(t) / (s * s);
    };
    quad::AdaptiveOptions opt;
    opt.abs_tol = 1e-13;
    const double q = quad::adaptive(near, 0.0, 1.0, opt).value + quad::adaptive(far, 1e-300, 1.0, opt).value;
    EXPECT_NEAR(p.moment(order), q, 1e-8 * q) << order;
  }
  EXPECT_THROW((void)p.moment(2.5), hawkesmix::HypothesisError);
  EXPECT_THROW((void)p.moment(3.0), hawkesmix::HypothesisError);
}

TEST(Kernel, PowerLawFourierMatchesDirectQuadrature) {
  const Kernel p = Kernel::power_law(0.5, 1.0, 2.5);
  const double x_max = 4000.0;
  const double tail = p.tail_mass(x_max);  // bounds the neglected part
  for (double xi : {0.05, 0.3, 1.0, -0.7}) {
    const auto fast = p.fourier(xi);
    const auto slow = direct_fourier(p, xi, x_max);
    EXPECT_LT(std::abs(fast - slow), tail + 1e-9) << xi;
  }
  EXPECT_DOUBLE_EQ(p.fourier(0.0).real(), 0.5);
}

TEST(Kernel, UniformFourierMatchesQuadrature) {
  const Kernel k = Kernel::uniform(0.8, 2.0);
  for (double xi : {0.1, 0.75, 3.3}) {
    EXPECT_LT(std::abs(k.fourier(xi) - direct_fourier(k, xi, 2.0)), 1e-11);
  }
}

TEST(Kernel, FourierBoundedByVariation) {
  for (const Kernel& k : {Kernel::exponential(0.5, 2.0), Kernel::power_law(0.5, 1.0, 2.5),
                          Kernel::uniform(0.5, 1.0)}) {
    for (double xi : {0.5, 2.0, 10.0, 50.0}) {
      EXPECT_LE(std::abs(k.fourier(xi)),
                k.total_variation() / (2.0 * std::numbers::pi * xi) * (1 + 1e-12))
          << k.family_name() << " " << xi;
    }
  }
}

TEST(Kernel, InverseCdfRoundTrip) {
  for (const Kernel& k : {Kernel::exponential(0.5, 2.0), Kernel::power_law(0.5, 1.0, 2.5),
                          Kernel::uniform(0.5, 3.0)}) {
    for (double u : {0.01, 0.3, 0.5, 0.9, 0.999}) {
      EXPECT_NEAR(k.delay_cdf(k.delay_from_uniform(u)), 1.0 - u, 1e-12) << k.family_name();
    }
  }
}

TEST(Kernel, SampledDelayMean) {
  const Kernel k = Kernel::exponential(0.5, 2.0);
  auto rng = hawkesmix::make_stream(11);
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += k.sample_delay(rng);
  // mean 0.5, standard deviation 0.5
  EXPECT_NEAR(s / n, 0.5, 4.0 * 0.5 / std::sqrt(n));
}
