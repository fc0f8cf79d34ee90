#pragma once

// Multitype Galton-Watson analytics for the cluster representation: the
// Laplace recurrence L{Z_k}(u) = exp(g^k(u)_z) with g(u) = M (e^u - 1), a
// contraction certificate for g, exponential tail sums for Z_k, and the
// assembled covariance-decay bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hawkesmix/error.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix {

/// g(u) = M (e^u - 1), exponentiation componentwise.
inline Vector g_map(const Matrix& m, const Vector& u) {
  if ((u.array() < 0.0).any()) throw DomainError("g_map needs u >= 0");
  return m * u.unaryExpr([](double x) { return std::expm1(x); });
}

/// k-fold composition g^k(u).
inline Vector g_iterate(const Matrix& m, Vector u, std::size_t k) {
  for (std::size_t step = 0; step < k; ++step) {
    u = g_map(m, u);
    if (!u.allFinite() || u.maxCoeff() > 700.0) {
      throw NumericError("g^k(u) overflowed at step " + std::to_string(step + 1) +
                         "; reproduction matrix is not contracting here");
    }
  }
  return u;
}

/// L{Z_k}(u) - 1 = expm1(g^k(u)_z) for a cluster started by one individual
/// of type z.
inline double laplace_Zk_minus_one(const Matrix& m, const Vector& u, std::size_t k,
                                   std::size_t ancestor) {
  if (ancestor >= static_cast<std::size_t>(m.rows())) throw DomainError("ancestor type out of range");
  if (!(u.array() > 0.0).all()) throw DomainError("laplace_Zk needs u > 0");
  return std::expm1(g_iterate(m, u, k)(static_cast<Eigen::Index>(ancestor)));
}

/// E[exp(Z_k^T u)] under Poisson(M_ij) offspring, single type-z ancestor.
inline double laplace_Zk(const Matrix& m, const Vector& u, std::size_t k, std::size_t ancestor) {
  return 1.0 + laplace_Zk_minus_one(m, u, k, ancestor);
}

struct ContractionPolicy {
  double delta_max = 2.0;
  std::optional<double> delta;  // overrides the midpoint choice when set
  double remainder_tol = 1e-12;
};

/// Constants making g a contraction near 0:
///  * e^x - 1 <= delta x on [0, u0];
///  * sup_k |delta^k M^k u|_inf <= u0, hence g^k(u) <= delta^k M^k u;
///  * |M^k|_1 <= (rho + epsilon)^k for all k >= k0, hence
///    |g^k(u)|_1 <= c^k |u|_1 with c = delta (rho + epsilon) < 1.
struct ContractionCert {
  double rho = 0.0;
  double delta = 0.0;
  double u0 = 0.0;
  double epsilon = 0.0;
  double c = 0.0;
  std::size_t k0 = 1;
  std::size_t horizon = 0;  // K: the sup over k was scanned on [0, K]
  Vector u;
};

namespace detail {

// Largest x with e^x - 1 <= delta x, delta > 1.
inline double contraction_radius(double delta) {
  auto f = [delta](double x) { return std::expm1(x) - delta * x; };
  double hi = 1.0;
  while (f(hi) <= 0.0) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) <= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

inline ContractionCert contraction_certificate(const Matrix& m, const ContractionPolicy& policy = {}) {
  ContractionCert cert;
  cert.rho = require_subcritical(m);
  const auto d = m.rows();
  const double rho = cert.rho;

  if (policy.delta) {
    if (!(*policy.delta > 1.0) || (rho > 0.0 && !(*policy.delta < 1.0 / rho))) {
      throw DomainError("delta must satisfy 1 < delta < 1/rho");
    }
    cert.delta = *policy.delta;
  } else {
    cert.delta = rho > 0.0 ? std::min(0.5 * (1.0 + 1.0 / rho), policy.delta_max) : policy.delta_max;
  }
  cert.u0 = detail::contraction_radius(cert.delta);
  cert.epsilon = 0.5 * (1.0 / cert.delta - rho);
  cert.c = cert.delta * (rho + cert.epsilon);

  // Powers of M and their l1 operator norms, extended on demand.
  std::vector<Matrix> powers{Matrix::Identity(d, d)};
  auto power = [&](std::size_t k) -> const Matrix& {
    while (powers.size() <= k) powers.push_back(powers.back() * m);
    return powers[k];
  };
  const double log_rate = std::log(rho + cert.epsilon);
  auto within = [&](std::size_t k) {
    const double n = operator_l1_norm(power(k));
    return n == 0.0 || std::log(n) <= static_cast<double>(k) * log_rate;
  };
  // If the bound holds on [k, 2k - 1], submultiplicativity extends it to
  // every power >= k.
  constexpr std::size_t kMaxK0 = 50000;
  std::size_t k0 = 1;
  while (true) {
    bool ok = true;
    for (std::size_t j = k0; j < 2 * k0; ++j) {
      if (!within(j)) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    if (++k0 > kMaxK0) throw NumericError("contraction_certificate: no k0 found");
  }
  cert.k0 = k0;

  // Beyond K, |delta^k M^k 1|_inf <= c^k d is far below the k = 0 value 1.
  const double scale = static_cast<double>(d) * std::max(cert.u0, 1.0);
  auto horizon = static_cast<std::size_t>(
      std::ceil(std::log(policy.remainder_tol / scale) / std::log(cert.c)));
  cert.horizon = std::max<std::size_t>(2 * k0, horizon);

  double sup = 0.0;
  Vector v = Vector::Ones(d);
  for (std::size_t k = 0; k <= cert.horizon; ++k) {
    sup = std::max(sup, sup_norm(v));
    v = cert.delta * (m * v);
  }
  cert.u = Vector::Constant(d, cert.u0 / sup);
  return cert;
}

struct CertificateCheck {
  bool expm1_bound = true;    // e^x - 1 <= delta x on a dense grid of [0, u0]
  bool sup_bound = true;      // |delta^k M^k u|_inf <= u0
  bool g_dominated = true;    // g^k(u) <= delta^k M^k u
  bool l1_contraction = true; // |g^k(u)|_1 <= c^k |u|_1 for k >= k0
  [[nodiscard]] bool ok() const { return expm1_bound && sup_bound && g_dominated && l1_contraction; }
};

/// Re-checks the certificate invariants for k <= k_max.
inline CertificateCheck verify_certificate(const Matrix& m, const ContractionCert& cert,
                                           std::size_t k_max, double rel_tol = 1e-12) {
  CertificateCheck out;
  constexpr int kGrid = 10000;
  for (int i = 0; i <= kGrid; ++i) {
    const double x = cert.u0 * i / kGrid;
    if (std::expm1(x) > cert.delta * x * (1.0 + rel_tol)) out.expm1_bound = false;
  }
  Vector g = cert.u;
  Vector lin = cert.u;
  const double u_l1 = l1_norm(cert.u);
  for (std::size_t k = 0; k <= k_max; ++k) {
    if (sup_norm(lin) > cert.u0 * (1.0 + rel_tol)) out.sup_bound = false;
    if (((g - lin).array() > rel_tol * lin.array().abs() + 1e-300).any()) out.g_dominated = false;
    if (k >= cert.k0 &&
        l1_norm(g) > std::pow(cert.c, static_cast<double>(k)) * u_l1 * (1.0 + rel_tol)) {
      out.l1_contraction = false;
    }
    g = g_map(m, g);
    lin = cert.delta * (m * lin);
  }
  return out;
}

/// sum_{n >= 1} (e^{u n} - 1)^{-1/p}, truncated with a certified remainder;
/// `value` includes the remainder bound.
struct SeriesBound {
  double value = 0.0;
  double remainder = 0.0;
  std::size_t terms = 0;
};

inline SeriesBound tail_sum_constant(double u, double p) {
  if (!(u > 0.0) || !std::isfinite(u)) {
    throw DomainError("tail-sum constant diverges for u <= 0");
  }
  if (!(p >= 1.0)) throw DomainError("tail-sum exponent p must be >= 1");
  SeriesBound s;
  double partial = 0.0;
  for (std::size_t n = 1;; ++n) {
    partial += std::pow(std::expm1(u * static_cast<double>(n)), -1.0 / p);
    // Remainder for terms > n: (1 - e^{-u(n+1)})^{-1/p} e^{-u(n+1)/p} / (1 - e^{-u/p}).
    const double next = static_cast<double>(n + 1);
    const double rem = std::pow(-std::expm1(-u * next), -1.0 / p) * std::exp(-u * next / p) /
                       (-std::expm1(-u / p));
    if (rem <= 1e-12 * partial || n >= 100000000) {
      s.value = partial + rem;
      s.remainder = rem;
      s.terms = n;
      break;
    }
  }
  return s;
}

struct TailSumBound {
  double bound = 0.0;              // C1 (L{Z_k}(u) - 1)^{1/p}
  double c1 = 0.0;
  double laplace_minus_one = 0.0;  // L{Z_k}(u) - 1 used
};

/// Upper bound on sum_{n >= 1} P(Z_ki >= n)^{1/p}. With no ancestor given
/// the largest Laplace transform over ancestor types is used, so the bound
/// holds whatever type started the cluster.
inline TailSumBound tail_sum_Z(const Matrix& m, const ContractionCert& cert, std::size_t k,
                               std::size_t type, double p,
                               std::optional<std::size_t> ancestor = std::nullopt) {
  const auto d = static_cast<std::size_t>(m.rows());
  if (type >= d) throw DomainError("type out of range");
  if (!(p > 1.0)) throw DomainError("tail_sum_Z needs p > 1");
  TailSumBound out;
  out.c1 = tail_sum_constant(cert.u(static_cast<Eigen::Index>(type)), p).value;
  const Vector gk = g_iterate(m, cert.u, k);
  if (ancestor) {
    if (*ancestor >= d) throw DomainError("ancestor type out of range");
    out.laplace_minus_one = std::expm1(gk(static_cast<Eigen::Index>(*ancestor)));
  } else {
    out.laplace_minus_one = std::expm1(gk.maxCoeff());
  }
  out.bound = out.c1 * std::pow(out.laplace_minus_one, 1.0 / p);
  return out;
}

/// Markov bound on P(T >= horizon) for a generation-l arrival:
/// min(1, l^{1+beta} nu / horizon^{1+beta}).
inline double arrival_tail_bound(double nu, double beta, std::size_t generation, double horizon) {
  if (!(beta > 0.0)) throw DomainError("arrival_tail_bound needs beta > 0");
  if (!(horizon > 0.0)) throw DomainError("arrival_tail_bound needs a positive horizon");
  if (generation == 0) return 0.0;
  const double l = static_cast<double>(generation);
  return std::min(1.0, std::pow(l / horizon, 1.0 + beta) * nu);
}

/// Generation sizes Z_0..Z_K of a multitype Galton-Watson process with
/// Poisson(M_ij) offspring, started from one individual of type `ancestor`.
inline std::vector<std::vector<std::uint64_t>> simulate_gw(const Matrix& m, std::size_t ancestor,
                                                           std::size_t generations, Rng& rng) {
  const auto d = static_cast<std::size_t>(m.rows());
  if (ancestor >= d) throw DomainError("ancestor type out of range");
  std::vector<std::vector<std::uint64_t>> z(generations + 1, std::vector<std::uint64_t>(d, 0));
  z[0][ancestor] = 1;
  for (std::size_t k = 1; k <= generations; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      const auto parents = z[k - 1][i];
      if (parents == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double mean = static_cast<double>(parents) *
                            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        z[k][j] += poisson(rng, mean);
      }
    }
  }
  return z;
}

struct MixingBoundRow {
  double lag = 0.0;
  double bound = 0.0;  // bound on |Cov(1_A, 1_B)| and on sum_ij |Cov(N_i(A), N_j(B))|
};

struct MixingBoundReport {
  double beta = 0.0;
  double gamma = 0.0;
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;
  double q_mean = 0.0;  // Hoelder exponent of the E[Z] E[Z] branch
  double nu = 0.0;      // sup_ij moment of order 1 + beta
  ContractionCert cert;
  double c1_p = 0.0;
  double c1_q = 0.0;
  double c1_q_mean = 0.0;
  std::size_t truncation = 0;  // generations kept in each index of the double series
  double series_truncated = 0.0;
  double series_remainder = 0.0;  // certified bound on the discarded terms
  /// Bound = constant * lag^{-gamma}.
  double constant = 0.0;
  /// Per-pair constants: |Cov(N_i(A), N_j(B))| <= pair_constant(i, j) * lag^{-gamma}.
  Matrix pair_constant;
  std::vector<MixingBoundRow> rows;

  [[nodiscard]] double bound_at(double lag) const { return constant * std::pow(lag, -gamma); }
  [[nodiscard]] double pair_bound_at(std::size_t i, std::size_t j, double lag) const {
    return pair_constant(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
           std::pow(lag, -gamma);
  }
  [[nodiscard]] double relative_truncation_error() const {
    const double total = series_truncated + series_remainder;
    return total > 0.0 ? series_remainder / total : 0.0;
  }
};

inline constexpr const char* kGammaBelowBeta = "decay exponent (0 < gamma < beta)";

/// Numeric covariance-decay bound for intervals A = (s, t], B = (t + tau, v]:
///
///   |Cov(1_A, 1_B)| <= sum_ij |Cov(N_i(A), N_j(B))|
///     <= sum_z eta_z sum_ij sum_{k,l} max(a_k b_l, E[Z_ki] b~_l) l^{1+gamma}
///        * nu^{1/r} * tau^{-gamma} / gamma,
///
/// where a_k, b_l, b~_l are the exponential tail sums of Z_k with Hoelder
/// exponents p, q and q~ = (1 - 1/r)^{-1}, and the final factor integrates
/// the arrival-time Markov bound over immigrant positions y < t.
/// r = (1 + beta)/(1 + gamma) and p = q = 2(1 + beta)/(beta - gamma).
inline MixingBoundReport mixing_bound(const HawkesModel& model, double beta, double gamma,
                                      const std::vector<double>& lags,
                                      const ContractionPolicy& policy = {},
                                      double relative_remainder = 1e-4) {
  if (!(gamma > 0.0 && gamma < beta)) {
    throw HypothesisError(kGammaBelowBeta, "need 0 < gamma < beta, got gamma = " +
                                               std::to_string(gamma) + ", beta = " +
                                               std::to_string(beta));
  }
  for (double lag : lags) {
    if (!(lag > 0.0) || !std::isfinite(lag)) throw DomainError("lags must be finite and > 0");
  }
  const ModelSummary summary = validate(model, beta);
  MixingBoundReport rep;
  rep.beta = beta;
  rep.gamma = gamma;
  rep.nu = *summary.nu;
  if (!std::isfinite(rep.nu)) throw HypothesisError("finite kernel moment", "nu is not finite");
  rep.r = (1.0 + beta) / (1.0 + gamma);
  rep.p = 2.0 * (1.0 + beta) / (beta - gamma);
  rep.q = rep.p;
  rep.q_mean = 1.0 / (1.0 - 1.0 / rep.r);

  const Matrix& m = model.reproduction_matrix();
  const auto d = m.rows();
  rep.cert = contraction_certificate(m, policy);
  const ContractionCert& cert = rep.cert;
  rep.pair_constant = Matrix::Zero(d, d);

  if (m.isZero(0.0)) {
    // A lone immigrant cannot sit in both A and B.
    rep.c1_p = tail_sum_constant(cert.u(0), rep.p).value;
    rep.c1_q = tail_sum_constant(cert.u(0), rep.q).value;
    rep.c1_q_mean = tail_sum_constant(cert.u(0), rep.q_mean).value;
    for (double lag : lags) rep.rows.push_back({lag, 0.0});
    return rep;
  }

  const double u_min = cert.u.minCoeff();
  const double u_l1 = l1_norm(cert.u);
  std::vector<double> c1p(d), c1q(d), c1qm(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    c1p[i] = tail_sum_constant(cert.u(i), rep.p).value;
    c1q[i] = tail_sum_constant(cert.u(i), rep.q).value;
    c1qm[i] = tail_sum_constant(cert.u(i), rep.q_mean).value;
  }
  rep.c1_p = *std::max_element(c1p.begin(), c1p.end());
  rep.c1_q = *std::max_element(c1q.begin(), c1q.end());
  rep.c1_q_mean = *std::max_element(c1qm.begin(), c1qm.end());
  const double one_plus_gamma = 1.0 + gamma;

  std::size_t trunc = std::max<std::size_t>(64, 2 * cert.k0);
  constexpr std::size_t kMaxTrunc = 1u << 20;
  while (true) {
    const std::size_t kk = trunc;
    // Laplace transforms g^k(u) for k <= K and mean generation sizes.
    std::vector<Vector> gk(kk + 1);
    std::vector<Matrix> mean_z(kk + 1);  // mean_z[k](z, i) = E[Z_ki | ancestor z]
    gk[0] = cert.u;
    mean_z[0] = Matrix::Identity(d, d);
    for (std::size_t k = 1; k <= kk; ++k) {
      gk[k] = g_map(m, gk[k - 1]);
      mean_z[k] = mean_z[k - 1] * m;
    }
    // Geometric envelopes for k > K: L_k - 1 <= c^k |u|_1 e^{c^K |u|_1}.
    const double cK = std::pow(cert.c, static_cast<double>(kk));
    const double env = u_l1 * std::exp(cK * u_l1);

    double truncated = 0.0;
    double remainder = 0.0;
    rep.pair_constant.setZero();
    for (Eigen::Index z = 0; z < d; ++z) {
      const double eta_z = model.eta()(z);
      std::vector<double> lm1(kk + 1);
      for (std::size_t k = 0; k <= kk; ++k) lm1[k] = std::expm1(gk[k](z));
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          // Truncated double series with the exact max of both branches.
          double s = 0.0;
          double a_sum = 0.0, e_sum = 0.0, b_sum = 0.0, bm_sum = 0.0;
          std::vector<double> b(kk + 1), bm(kk + 1);
          for (std::size_t l = 0; l <= kk; ++l) {
            const double w = l == 0 ? 0.0 : std::pow(static_cast<double>(l), one_plus_gamma);
            b[l] = c1q[j] * std::pow(lm1[l], 1.0 / rep.q) * w;
            bm[l] = c1qm[j] * std::pow(lm1[l], 1.0 / rep.q_mean) * w;
            b_sum += b[l];
            bm_sum += bm[l];
          }
          for (std::size_t k = 0; k <= kk; ++k) {
            const double a = c1p[i] * std::pow(lm1[k], 1.0 / rep.p);
            const double e = mean_z[k](z, i);
            a_sum += a;
            e_sum += e;
            if (a == 0.0 && e == 0.0) continue;
            for (std::size_t l = 1; l <= kk; ++l) s += std::max(a * b[l], e * bm[l]);
          }
          // Certified remainders of the single series beyond K.
          auto geometric_tail = [kk](double coef, double x) {
            return coef * std::pow(x, static_cast<double>(kk + 1)) / (1.0 - x);
          };
          auto weighted_tail = [kk, one_plus_gamma](double coef, double x) {
            const double first = static_cast<double>(kk + 1);
            const double ratio = std::pow((first + 1.0) / first, one_plus_gamma) * x;
            if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
            return coef * std::pow(first, one_plus_gamma) * std::pow(x, first) / (1.0 - ratio);
          };
          const double xp = std::pow(cert.c, 1.0 / rep.p);
          const double xq = std::pow(cert.c, 1.0 / rep.q);
          const double xqm = std::pow(cert.c, 1.0 / rep.q_mean);
          const double a_rem = geometric_tail(c1p[i] * std::pow(env, 1.0 / rep.p), xp);
          const double e_rem = geometric_tail(env / u_min, cert.c);
          const double b_rem = weighted_tail(c1q[j] * std::pow(env, 1.0 / rep.q), xq);
          const double bm_rem = weighted_tail(c1qm[j] * std::pow(env, 1.0 / rep.q_mean), xqm);
          const double rem = a_rem * (b_sum + b_rem) + a_sum * b_rem +
                             e_rem * (bm_sum + bm_rem) + e_sum * bm_rem;
          truncated += eta_z * s;
          remainder += eta_z * rem;
          rep.pair_constant(i, j) += eta_z * (s + rem);
        }
      }
    }
    if (remainder <= relative_remainder * truncated || trunc >= kMaxTrunc) {
      if (!(remainder <= relative_remainder * truncated)) {
        throw NumericError("mixing_bound: series remainder did not fall below tolerance");
      }
      rep.truncation = kk;
      rep.series_truncated = truncated;
      rep.series_remainder = remainder;
      break;
    }
    trunc *= 2;
  }
  const double scale = std::pow(rep.nu, 1.0 / rep.r) / gamma;
  rep.pair_constant *= scale;
  rep.constant = (rep.series_truncated + rep.series_remainder) * scale;
  for (double lag : lags) rep.rows.push_back({lag, rep.bound_at(lag)});
  return rep;
}

}  // namespace hawkesmix
