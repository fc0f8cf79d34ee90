#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "hawkesmix/error.hpp"
#include "hawkesmix/quadrature.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix {

/// h(t) = alpha * beta * exp(-beta t)
struct Exponential {
  double alpha;
  double beta;
};

/// h(t) = alpha * theta * c^theta / (c + t)^(1 + theta)
struct PowerLaw {
  double alpha;
  double scale;  // c
  double tail;   // theta
};

/// h(t) = alpha / a on [0, a]
struct Uniform {
  double alpha;
  double support;  // a
};

struct Zero {};

/// A reproduction function h >= 0 supported on [0, inf) with finite mass.
/// Immutable after construction.
class Kernel {
 public:
  using Family = std::variant<Zero, Exponential, PowerLaw, Uniform>;

  Kernel() = default;

  static Kernel zero() { return Kernel(Zero{}); }

  static Kernel exponential(double alpha, double beta) {
    require(alpha >= 0.0 && std::isfinite(alpha), "exponential alpha must be >= 0");
    require(beta > 0.0 && std::isfinite(beta), "exponential beta must be > 0");
    return Kernel(Exponential{alpha, beta});
  }

  static Kernel power_law(double alpha, double scale, double tail) {
    require(alpha >= 0.0 && std::isfinite(alpha), "power-law alpha must be >= 0");
    require(scale > 0.0 && std::isfinite(scale), "power-law scale c must be > 0");
    require(tail > 1.0 && std::isfinite(tail), "power-law tail index theta must be > 1");
    return Kernel(PowerLaw{alpha, scale, tail});
  }

  static Kernel uniform(double alpha, double support) {
    require(alpha >= 0.0 && std::isfinite(alpha), "uniform alpha must be >= 0");
    require(support > 0.0 && std::isfinite(support), "uniform support a must be > 0");
    return Kernel(Uniform{alpha, support});
  }

  [[nodiscard]] const Family& family() const noexcept { return family_; }

  [[nodiscard]] std::string_view family_name() const {
    return std::visit(
        [](const auto& k) -> std::string_view {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) return "exponential";
          else if constexpr (std::is_same_v<K, PowerLaw>) return "powerlaw";
          else if constexpr (std::is_same_v<K, Uniform>) return "uniform";
          else return "zero";
        },
        family_);
  }

  /// L1 norm, i.e. the mean number of direct offspring.
  [[nodiscard]] double l1_norm() const {
    return std::visit(
        [](const auto& k) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(k)>, Zero>) return 0.0;
          else return k.alpha;
        },
        family_);
  }

  [[nodiscard]] bool is_zero() const { return l1_norm() == 0.0; }

  /// h(t). Throws DomainError for t < 0 or non-finite t.
  [[nodiscard]] double evaluate(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw DomainError("kernel evaluated at negative or non-finite time");
    }
    return evaluate_unchecked(t);
  }

  /// h(t) for t >= 0 without argument checks (simulation hot path).
  [[nodiscard]] double evaluate_unchecked(double t) const {
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            return k.alpha * k.beta * std::exp(-k.beta * t);
          } else if constexpr (std::is_same_v<K, PowerLaw>) {
            return k.alpha * k.tail / k.scale *
                   std::pow(k.scale / (k.scale + t), 1.0 + k.tail);
          } else if constexpr (std::is_same_v<K, Uniform>) {
            return t <= k.support ? k.alpha / k.support : 0.0;
          } else {
            return 0.0;
          }
        },
        family_);
  }

  /// CDF of the normalised delay density h / |h|_1.
  [[nodiscard]] double delay_cdf(double t) const {
    if (t <= 0.0) return 0.0;
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            return -std::expm1(-k.beta * t);
          } else if constexpr (std::is_same_v<K, PowerLaw>) {
            return -std::expm1(k.tail * std::log(k.scale / (k.scale + t)));
          } else if constexpr (std::is_same_v<K, Uniform>) {
            return t >= k.support ? 1.0 : t / k.support;
          } else {
            return 1.0;
          }
        },
        family_);
  }

  /// Mass of h beyond x: integral of h over (x, inf).
  [[nodiscard]] double tail_mass(double x) const {
    return l1_norm() * (1.0 - delay_cdf(x));
  }

  /// Total variation of h on the real line (including the jump at 0);
  /// bounds |fourier(xi)| <= total_variation / (2 pi |xi|).
  [[nodiscard]] double total_variation() const {
    return std::visit(
        [](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) return k.alpha * k.beta;
          else if constexpr (std::is_same_v<K, PowerLaw>) return k.alpha * k.tail / k.scale;
          else if constexpr (std::is_same_v<K, Uniform>) return 2.0 * k.alpha / k.support;
          else return 0.0;
        },
        family_);
  }

  /// Mean delay, i.e. the first moment of h / |h|_1 (0 for Zero).
  [[nodiscard]] double mean_delay() const {
    if (is_zero()) return 0.0;
    return moment(1.0);
  }

  /// p-th moment of the normalised delay density. Throws HypothesisError
  /// when the moment is infinite (power law with p >= theta) and
  /// DomainError for a massless kernel or p <= 0.
  [[nodiscard]] double moment(double p) const {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("moment order must be > 0");
    if (is_zero()) throw DomainError("moment of a massless kernel is undefined");
    return std::visit(
        [p](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            return std::exp(std::lgamma(p + 1.0) - p * std::log(k.beta));
          } else if constexpr (std::is_same_v<K, PowerLaw>) {
            if (p >= k.tail) {
              throw HypothesisError(
                  "finite kernel moment",
                  "infinite moment: order " + std::to_string(p) +
                      " >= power-law tail index " + std::to_string(k.tail));
            }
            // theta * c^p * B(p + 1, theta - p)
            return std::exp(p * std::log(k.scale) + std::lgamma(p + 1.0) +
                            std::lgamma(k.tail - p) - std::lgamma(k.tail));
          } else if constexpr (std::is_same_v<K, Uniform>) {
            return std::pow(k.support, p) / (p + 1.0);
          } else {
            return 0.0;
          }
        },
        family_);
  }

  /// Fourier transform  int exp(-2 pi i xi t) h(t) dt.
  [[nodiscard]] std::complex<double> fourier(double xi) const {
    if (!std::isfinite(xi)) throw DomainError("fourier frequency must be finite");
    if (xi == 0.0) return {l1_norm(), 0.0};
    return std::visit(
        [xi](const auto& k) -> std::complex<double> {
          using K = std::decay_t<decltype(k)>;
          constexpr double two_pi = 2.0 * std::numbers::pi;
          if constexpr (std::is_same_v<K, Exponential>) {
            return k.alpha * k.beta / std::complex<double>(k.beta, two_pi * xi);
          } else if constexpr (std::is_same_v<K, PowerLaw>) {
            return power_law_fourier(k, xi);
          } else if constexpr (std::is_same_v<K, Uniform>) {
            const double x = std::numbers::pi * xi * k.support;
            return k.alpha * std::polar(1.0, -x) * (std::sin(x) / x);
          } else {
            return {0.0, 0.0};
          }
        },
        family_);
  }

  /// Delay whose survival probability is u, for u in (0, 1).
  [[nodiscard]] double delay_from_uniform(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform variate must lie in (0, 1)");
    if (is_zero()) throw DomainError("cannot sample a delay from a zero kernel");
    return std::visit(
        [u](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            return -std::log(u) / k.beta;
          } else if constexpr (std::is_same_v<K, PowerLaw>) {
            return k.scale * std::expm1(-std::log(u) / k.tail);
          } else if constexpr (std::is_same_v<K, Uniform>) {
            return k.support * (1.0 - u);
          } else {
            return 0.0;
          }
        },
        family_);
  }

  /// One delay with density h / |h|_1.
  [[nodiscard]] double sample_delay(Rng& rng) const {
    return delay_from_uniform(uniform_open(rng));
  }

  /// True when h is non-increasing on [0, inf) (all built-in families).
  [[nodiscard]] static constexpr bool non_increasing() { return true; }

 private:
  explicit Kernel(Family f) : family_(f) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
  }

  // Rotating the integration path onto the negative imaginary axis (the
  // integrand is analytic and decaying in the fourth quadrant) turns the
  // oscillatory transform into
  //   -i alpha theta * int_0^inf exp(-omega v) (1 - i v)^(-1 - theta) dv,
  // omega = 2 pi |xi| c, integrated on geometric panels with an explicit
  // remainder bound. Negative frequencies follow by conjugation.
  static std::complex<double> power_law_fourier(const PowerLaw& k, double xi) {
    const double omega = 2.0 * std::numbers::pi * std::abs(xi) * k.scale;
    const double expo = -1.0 - k.tail;
    auto integrand = [omega, expo](double v) {
      return std::exp(-omega * v) * std::pow(std::complex<double>(1.0, -v), expo);
    };
    // Remainder beyond V is at most min(V^-theta / theta, e^{-omega V} V^{-1-theta} / omega).
    auto remainder = [&](double v) {
      return std::min(std::pow(v, -k.tail) / k.tail,
                      std::exp(-omega * v) * std::pow(v, expo) / omega);
    };
    constexpr double tol = 1e-15;
    double lo = 0.0;
    double width = std::min(1.0, 1.0 / omega);
    std::complex<double> acc{0.0, 0.0};
    quad::AdaptiveOptions opt;
    opt.abs_tol = 1e-17;
    opt.rel_tol = 1e-13;
    for (int panel = 0; panel < 4096; ++panel) {
      const double hi = lo + width;
      acc += quad::adaptive(integrand, lo, hi, opt).value;
      lo = hi;
      if (remainder(lo) < tol) break;
      width = lo;
    }
    std::complex<double> value = std::complex<double>(0.0, -1.0) * k.alpha * k.tail * acc;
    return xi < 0.0 ? std::conj(value) : value;
  }

  Family family_{Zero{}};
};

}  // namespace hawkesmix
