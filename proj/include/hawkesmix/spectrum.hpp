#pragma once

// Bartlett spectral density of a stationary linear Hawkes process and the
// variances / covariances of linear statistics obtained by integrating it
// against test-function transforms.
//
// With H(xi)_ij = F h_ij(xi) and P(xi) = (I - H^T)^{-1} - I,
//   gamma(xi) = (I - H^T)^{-1} diag(m) (I - H(-xi))^{-1} = (I + P) D (I + P)^H,
// and Cov(N_i(f), N_j(g)) = int conj(F f(xi)) F g(xi) gamma_ij(xi) dxi.
// The flat part D = diag(m) is integrated exactly in the time domain
// (Parseval); only R = gamma - D goes through quadrature.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hawkesmix/error.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/quadrature.hpp"
#include "hawkesmix/test_function.hpp"

namespace hawkesmix {

using CMatrix = Eigen::MatrixXcd;

struct SpectrumMatrix {
  double xi = 0.0;
  CMatrix value;

  [[nodiscard]] double hermitian_defect() const {
    return (value - value.adjoint()).cwiseAbs().maxCoeff();
  }
  [[nodiscard]] double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (value + value.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
};

namespace detail {

inline CMatrix transfer_matrix(const HawkesModel& model, double xi) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  CMatrix h(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      h(i, j) = model.kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).fourier(xi);
  return h;
}

// P = (I - H^T)^{-1} H^T
inline CMatrix resolvent_part(const HawkesModel& model, double xi) {
  const CMatrix ht = transfer_matrix(model, xi).transpose();
  const auto d = ht.rows();
  if (ht.isZero(0.0)) return CMatrix::Zero(d, d);
  const CMatrix a = CMatrix::Identity(d, d) - ht;
  Eigen::PartialPivLU<CMatrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    throw NumericError("I - H(xi)^T is numerically singular at xi = " + std::to_string(xi));
  }
  return lu.solve(ht);
}

}  // namespace detail

/// gamma(xi) - diag(m), Hermitian.
inline CMatrix spectral_remainder(const HawkesModel& model, const Vector& m, double xi) {
  const CMatrix p = detail::resolvent_part(model, xi);
  const CMatrix pd = p * m.asDiagonal();
  return pd + pd.adjoint() + pd * p.adjoint();
}

inline SpectrumMatrix bartlett_density(const HawkesModel& model, double xi) {
  const Vector m = mean_intensity(model);
  SpectrumMatrix s;
  s.xi = xi;
  s.value = spectral_remainder(model, m, xi);
  s.value.diagonal() += m.cast<std::complex<double>>();
  return s;
}

/// Entrywise |R(xi)| <= K / |xi| for |xi| >= xi_min, from |H_ij(xi)| <=
/// min(M_ij, V_ij / (2 pi |xi|)) with V_ij the total variation of h_ij.
inline Matrix remainder_decay(const HawkesModel& model, const Vector& m, double xi_min) {
  const Matrix& mat = model.reproduction_matrix();
  const auto d = mat.rows();
  Matrix v(d, d), e(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      v(i, j) = model.kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).total_variation();
      e(i, j) = std::min(mat(i, j), v(i, j) / (2.0 * std::numbers::pi * xi_min));
    }
  }
  const Matrix id = Matrix::Identity(d, d);
  const Matrix pm = (v.transpose() / (2.0 * std::numbers::pi)) * (id - e.transpose()).inverse();
  const Matrix pd = pm * m.asDiagonal();
  return pd + pd.transpose() + pd * pm.transpose() / xi_min;
}

/// k^T gamma(0) k
inline double asymptotic_variance_const(const HawkesModel& model, const Vector& k) {
  if (static_cast<std::size_t>(k.size()) != model.dim()) throw DomainError("k has the wrong dimension");
  const CMatrix g = bartlett_density(model, 0.0).value;
  const Eigen::VectorXcd kc = k.cast<std::complex<double>>();
  return std::max(0.0, (kc.adjoint() * g * kc)(0, 0).real());
}

struct VarianceOptions {
  double tail_rel = 1e-6;      // certified tail / value
  double xi_initial = 1.0;
  std::size_t max_nodes = 40000000;
};

struct VarianceReport {
  double value = 0.0;
  double poisson_part = 0.0;   // sum_i m_i int_0^T f_i^2
  double quad_error = 0.0;
  double tail_bound = 0.0;
  double xi_max = 0.0;
  std::size_t panels = 0;
};

/// Precomputed R(xi) on fixed Gauss-Kronrod panels over [0, Xi]; panels
/// are at most 1/T wide, so every horizon t <= T reuses the same nodes.
class VarianceIntegrator {
 public:
  VarianceIntegrator(const HawkesModel& model, TestFunction f, double max_horizon,
                     VarianceOptions opt = {})
      : model_(&model), f_(std::move(f)), horizon_(max_horizon), opt_(opt) {
    if (f_.dim() != model.dim()) throw DomainError("test function dimension does not match the model");
    if (!(max_horizon > 0.0) || !std::isfinite(max_horizon)) throw DomainError("T must be > 0");
    m_ = mean_intensity(model);
    d_ = static_cast<Eigen::Index>(model.dim());
    width_ = std::min(0.25, 1.0 / max_horizon);
    zero_kernels_ = model.reproduction_matrix().isZero(0.0);
  }

  [[nodiscard]] double max_horizon() const noexcept { return horizon_; }
  [[nodiscard]] double xi_max() const noexcept { return static_cast<double>(panels_) * width_; }

  /// Var(sum_i int_0^t f_i dN_i) for 0 < t <= T.
  VarianceReport variance(double t) {
    if (!(t > 0.0) || t > horizon_ * (1.0 + 1e-12)) {
      throw DomainError("variance horizon must lie in (0, T]");
    }
    VarianceReport rep;
    for (std::size_t i = 0; i < f_.dim(); ++i) {
      rep.poisson_part += m_(static_cast<Eigen::Index>(i)) * square_integral(f_[i], t);
    }
    if (zero_kernels_) {
      rep.value = rep.poisson_part;
      return rep;
    }
    if (panels_ == 0) extend(opt_.xi_initial);
    while (true) {
      const auto est = integrate(t);
      rep.value = rep.poisson_part + est.value;
      rep.quad_error = est.error;
      rep.tail_bound = tail_bound(t, xi_max());
      if (rep.tail_bound <= opt_.tail_rel * std::abs(rep.value)) break;
      if (2 * panels_ * 15 > opt_.max_nodes) {
        throw NumericError("variance quadrature: certified tail " + std::to_string(rep.tail_bound) +
                           " still above tolerance at xi = " + std::to_string(xi_max()) +
                           " (value " + std::to_string(rep.value) + ")");
      }
      extend(2.0 * xi_max());
    }
    rep.value = std::max(rep.value, 0.0);
    rep.xi_max = xi_max();
    rep.panels = panels_;
    return rep;
  }

 private:
  void extend(double xi_new) {
    const auto target = static_cast<std::size_t>(std::ceil(xi_new / width_));
    const std::size_t n = static_cast<std::size_t>(d_ * d_);
    nodes_.reserve(target * 15);
    remainder_.reserve(target * 15 * n);
    for (std::size_t p = panels_; p < target; ++p) {
      const double lo = static_cast<double>(p) * width_;
      const double centre = lo + 0.5 * width_;
      const double half = 0.5 * width_;
      for (int q = 0; q < 15; ++q) {
        const double off = q < 7 ? -quad::detail::kXgk[q] : (q == 7 ? 0.0 : quad::detail::kXgk[14 - q]);
        const double xi = centre + half * off;
        nodes_.push_back(xi);
        const CMatrix r = spectral_remainder(*model_, m_, xi);
        remainder_.insert(remainder_.end(), r.data(), r.data() + n);
      }
    }
    panels_ = target;
  }

  // Weights in node order: node q sits at -x[q] (q < 7), 0 (q == 7), +x[14-q].
  static double kronrod_weight(int q) { return quad::detail::kWgk[q < 8 ? q : 14 - q]; }
  static double gauss_weight(int q) {
    const int j = q < 8 ? q : 14 - q;
    if (j == 7) return quad::detail::kWg[3];
    return j % 2 == 1 ? quad::detail::kWg[j / 2] : 0.0;
  }

  quad::Estimate<double> integrate(double t) const {
    const auto d = d_;
    std::vector<std::complex<double>> a(static_cast<std::size_t>(d));
    double total = 0.0, err = 0.0;
    const double half = 0.5 * width_;
    for (std::size_t p = 0; p < panels_; ++p) {
      double k = 0.0, g = 0.0;
      for (int q = 0; q < 15; ++q) {
        const std::size_t node = p * 15 + static_cast<std::size_t>(q);
        const double xi = nodes_[node];
        for (Eigen::Index i = 0; i < d; ++i) a[i] = fourier(f_[static_cast<std::size_t>(i)], xi, t);
        const std::complex<double>* r = &remainder_[node * static_cast<std::size_t>(d * d)];
        std::complex<double> s{0.0, 0.0};
        for (Eigen::Index j = 0; j < d; ++j)
          for (Eigen::Index i = 0; i < d; ++i) s += std::conj(a[i]) * a[j] * r[i + j * d];
        const double v = 2.0 * s.real();
        k += kronrod_weight(q) * v;
        g += gauss_weight(q) * v;
      }
      total += k * half;
      err += std::abs(k - g) * half;
    }
    return {total, err};
  }

  double tail_bound(double t, double xi) const {
    const Matrix kr = remainder_decay(*model_, m_, xi);
    double s = 0.0;
    for (Eigen::Index i = 0; i < d_; ++i) {
      const auto di = fourier_decay(f_[static_cast<std::size_t>(i)], t);
      if (xi < di.valid_from) return std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < d_; ++j) {
        const auto dj = fourier_decay(f_[static_cast<std::size_t>(j)], t);
        if (xi < dj.valid_from) return std::numeric_limits<double>::infinity();
        s += di.variation * dj.variation * kr(i, j);
      }
    }
    return s / (4.0 * std::numbers::pi * std::numbers::pi * xi * xi);
  }

  const HawkesModel* model_;
  TestFunction f_;
  double horizon_;
  VarianceOptions opt_;
  Vector m_;
  Eigen::Index d_ = 0;
  double width_ = 0.0;
  bool zero_kernels_ = false;
  std::size_t panels_ = 0;
  std::vector<double> nodes_;
  std::vector<std::complex<double>> remainder_;  // column-major d x d per node
};

/// sigma_T^2 = Var(sum_i int_0^T f_i dN_i) with a certified frequency tail.
inline VarianceReport variance_ST_report(const HawkesModel& model, const TestFunction& f, double horizon,
                                         const VarianceOptions& opt = {}) {
  VarianceIntegrator integ(model, f, horizon, opt);
  return integ.variance(horizon);
}

inline double variance_ST(const HawkesModel& model, const TestFunction& f, double horizon,
                          const VarianceOptions& opt = {}) {
  return variance_ST_report(model, f, horizon, opt).value;
}

struct PeriodicVarianceReport {
  double value = 0.0;      // sigma^2 with sigma_T^2 = T sigma^2 + o(T)
  double tail_bound = 0.0; // bound on the harmonics |k| > K
  std::size_t harmonics = 0;
};

inline constexpr const char* kPeriodicNondegenerate = "nonzero periodic mean (sum_i int_0^tau h_i != 0)";

/// (1/tau^2) sum_{|k| <= K} sum_ij conj(F h_i(k/tau)) F h_j(k/tau) gamma_ij(k/tau),
/// transforms taken over one period [0, tau].
inline PeriodicVarianceReport asymptotic_variance_periodic(const HawkesModel& model, const TestFunction& h,
                                                           double tau, std::size_t harmonics) {
  if (h.dim() != model.dim()) throw DomainError("test function dimension does not match the model");
  if (!(tau > 0.0)) throw DomainError("period must be > 0");
  if (harmonics < 1) throw DomainError("harmonic truncation K must be >= 1");
  double mean = 0.0;
  bool finite_order = true;
  std::size_t order = 0;
  for (const auto& c : h.components()) {
    if (std::holds_alternative<Indicator>(c) || std::holds_alternative<ConstPlusIndicator>(c)) {
      throw DomainError("periodic variance needs periodic or constant components");
    }
    if (auto p = period_of(c); p && std::abs(*p - tau) > 1e-12 * tau) {
      throw DomainError("component period differs from tau");
    }
    mean += integral(c, tau);
    if (auto o = harmonic_order(c)) order = std::max(order, *o);
    else finite_order = false;
  }
  double scale = 0.0;
  for (const auto& c : h.components()) scale += sup_norm(c) * tau;
  if (std::abs(mean) <= 1e-12 * std::max(scale, 1e-300)) {
    throw HypothesisError(kPeriodicNondegenerate, "the test function has zero mean over one period");
  }
  const auto d = static_cast<Eigen::Index>(model.dim());
  const Vector m = mean_intensity(model);
  PeriodicVarianceReport rep;
  rep.harmonics = harmonics;
  double sum = 0.0;
  for (long k = -static_cast<long>(harmonics); k <= static_cast<long>(harmonics); ++k) {
    const double xi = static_cast<double>(k) / tau;
    Eigen::VectorXcd a(d);
    for (Eigen::Index i = 0; i < d; ++i) a(i) = fourier(h[static_cast<std::size_t>(i)], xi, tau);
    if (a.isZero(0.0)) continue;
    CMatrix g = spectral_remainder(model, m, xi);
    g.diagonal() += m.cast<std::complex<double>>();
    sum += (a.adjoint() * g * a)(0, 0).real();
  }
  rep.value = sum / (tau * tau);
  if (!(finite_order && harmonics >= order)) {
    // |F h_i(k/tau)| <= V_i tau / (2 pi |k|) and |gamma_ij(xi)| <= gamma_ij(0).
    const CMatrix g0 = bartlett_density(model, 0.0).value;
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        s += fourier_decay(h[static_cast<std::size_t>(i)], tau).variation *
             fourier_decay(h[static_cast<std::size_t>(j)], tau).variation * g0(i, j).real();
    rep.tail_bound = s / (2.0 * std::numbers::pi * std::numbers::pi * static_cast<double>(harmonics));
  }
  return rep;
}

struct Interval {
  double a = 0.0;
  double b = 0.0;  // (a, b]
};

struct CovCountsOptions {
  double xi_initial = 4.0;
  double xi_limit = 4096.0;
  double abs_tol = 1e-14;
  double rel_tol = 1e-10;
  double increment_rel = 1e-6;  // stop when the last doubling moved every value less than this
  // Absolute floor for the same test, relative to sqrt(m_i |A| m_j |B|).
  double increment_floor = 1e-11;
};

struct CovCountsReport {
  std::vector<double> values;
  double quad_error = 0.0;
  double tail_estimate = 0.0;  // size of the last frequency doubling (not a certified bound)
  double tail_bound = 0.0;     // certified but loose: ignores oscillation
  double xi_max = 0.0;
};

/// Cov(N_i(A), N_j(B_l)) for several B_l at once: the exact Poisson
/// overlap delta_ij m_i |A cap B| plus 2 Re int_0^Xi conj(F 1_A) F 1_B R_ij,
/// Xi doubled until the values settle.
inline CovCountsReport cov_counts_many(const HawkesModel& model, std::size_t i, std::size_t j, Interval a,
                                       const std::vector<Interval>& bs, const CovCountsOptions& opt = {}) {
  if (i >= model.dim() || j >= model.dim()) throw DomainError("component index out of range");
  auto check = [](Interval x) {
    if (!std::isfinite(x.a) || !std::isfinite(x.b) || !(x.a < x.b)) throw DomainError("intervals need finite a < b");
  };
  check(a);
  for (const auto& b : bs) check(b);
  const Vector m = mean_intensity(model);
  const auto n = static_cast<Eigen::Index>(bs.size());
  CovCountsReport rep;
  Eigen::ArrayXd base(n), floor(n);
  double reach = a.b - a.a;
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& b = bs[static_cast<std::size_t>(l)];
    const double overlap = std::max(0.0, std::min(a.b, b.b) - std::max(a.a, b.a));
    base(l) = i == j ? m(static_cast<Eigen::Index>(i)) * overlap : 0.0;
    floor(l) = opt.increment_floor *
               std::sqrt(m(static_cast<Eigen::Index>(i)) * (a.b - a.a) * m(static_cast<Eigen::Index>(j)) * (b.b - b.a));
    reach = std::max({reach, std::abs(b.b - a.a), std::abs(b.a - a.b), std::abs(b.b - a.b), std::abs(b.a - a.a)});
  }
  if (model.reproduction_matrix().isZero(0.0)) {
    rep.values.assign(base.data(), base.data() + n);
    return rep;
  }
  const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
  auto integrand = [&](double xi) {
    const std::complex<double> r = spectral_remainder(model, m, xi)(ii, jj);
    const std::complex<double> fa = std::conj(detail::segment_fourier(xi, a.a, a.b));
    Eigen::ArrayXd out(n);
    for (Eigen::Index l = 0; l < n; ++l) {
      const auto& b = bs[static_cast<std::size_t>(l)];
      out(l) = 2.0 * (fa * detail::segment_fourier(xi, b.a, b.b) * r).real();
    }
    return out;
  };
  quad::AdaptiveOptions qopt;
  qopt.abs_tol = opt.abs_tol;
  qopt.rel_tol = opt.rel_tol;
  qopt.max_panels = 4000000;
  Eigen::ArrayXd total = Eigen::ArrayXd::Zero(n);
  double lo = 0.0, hi = opt.xi_initial;
  while (true) {
    qopt.initial_panels = static_cast<std::size_t>(std::ceil((hi - lo) * reach)) + 1;
    const auto seg = quad::adaptive(integrand, lo, hi, qopt);
    total += seg.value;
    rep.quad_error += seg.error;
    const Eigen::ArrayXd moved = seg.value.abs();
    const Eigen::ArrayXd values = base + total;
    rep.xi_max = hi;
    rep.tail_estimate = moved.maxCoeff();
    if (lo > 0.0 && (moved <= (opt.increment_rel * values.abs()).max(floor)).all()) break;
    if (hi >= opt.xi_limit) {
      throw NumericError("cov_counts: values still moving by " + std::to_string(moved.maxCoeff()) +
                         " at xi = " + std::to_string(hi));
    }
    lo = hi;
    hi *= 2.0;
  }
  const Matrix kr = remainder_decay(model, m, rep.xi_max);
  // |F 1_A| <= 1 / (pi xi): 2 int_Xi^inf kr / (pi^2 xi^3) dxi.
  rep.tail_bound = kr(ii, jj) / (std::numbers::pi * std::numbers::pi * rep.xi_max * rep.xi_max);
  const Eigen::ArrayXd values = base + total;
  rep.values.assign(values.data(), values.data() + n);
  return rep;
}

inline double cov_counts(const HawkesModel& model, std::size_t i, std::size_t j, Interval a, Interval b,
                         const CovCountsOptions& opt = {}) {
  return cov_counts_many(model, i, j, a, {b}, opt).values.front();
}

}  // namespace hawkesmix
