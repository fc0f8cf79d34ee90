#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hawkesmix/error.hpp"
#include "hawkesmix/kernel.hpp"

namespace hawkesmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double l1_norm(const Vector& v) { return v.cwiseAbs().sum(); }
inline double sup_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Induced l1 operator norm (maximum absolute column sum).
inline double operator_l1_norm(const Matrix& m) {
  return m.size() ? m.cwiseAbs().colwise().sum().maxCoeff() : 0.0;
}

/// Perron root of a square nonnegative matrix. Small matrices (d <= 4) use
/// a direct eigen-solve; larger ones use power iteration on I + M from the
/// all-ones vector, stopping when the Collatz-Wielandt bracket is tighter
/// than 1e-12.
inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DomainError("spectral_radius needs a non-empty square matrix");
  }
  if ((m.array() < 0.0).any()) throw DomainError("spectral_radius needs a nonnegative matrix");
  const auto d = m.rows();
  if (d <= 4) {
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // The shift makes every irreducible block primitive; Perron root of I + M
  // is 1 + rho(M).
  const Matrix shifted = Matrix::Identity(d, d) + m;
  Vector x = Vector::Ones(d);
  constexpr int kMaxIter = 100000;
  double previous = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    Vector y = shifted * x;
    const double norm = y.maxCoeff();
    double lower = std::numeric_limits<double>::infinity();
    double upper = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double r = y(i) / x(i);
      lower = std::min(lower, r);
      upper = std::max(upper, r);
    }
    if (upper - lower <= 1e-12 * upper) return std::max(0.0, 0.5 * (lower + upper) - 1.0);
    // Reducible matrices can keep a loose bracket; fall back on the
    // stabilised growth ratio of the sup-norm.
    if (it > 1000 && std::abs(norm - previous) <= 1e-13 * norm) return std::max(0.0, norm - 1.0);
    previous = norm;
    x = y / norm;
  }
  throw NumericError("spectral_radius: power iteration did not converge in 1e5 iterations");
}

/// Multivariate Hawkes model. Entry (i, j) of the kernel matrix is h_ij, the
/// influence of component i on component j, so that
///   lambda_j(t) = eta_j + sum_i sum_{T_i < t} h_ij(t - T_i).
class HawkesModel {
 public:
  HawkesModel(Vector eta, std::vector<std::vector<Kernel>> kernels)
      : eta_(std::move(eta)), kernels_(std::move(kernels)) {
    const auto d = static_cast<std::size_t>(eta_.size());
    if (d == 0) throw DomainError("model dimension must be >= 1");
    if (kernels_.size() != d) throw DomainError("kernel matrix must be d x d");
    for (const auto& row : kernels_) {
      if (row.size() != d) throw DomainError("kernel matrix must be d x d");
    }
    for (Eigen::Index j = 0; j < eta_.size(); ++j) {
      if (!(eta_(j) > 0.0) || !std::isfinite(eta_(j))) {
        throw DomainError("baseline intensities must be finite and > 0");
      }
    }
    reproduction_ = Matrix(eta_.size(), eta_.size());
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        reproduction_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            kernels_[i][j].l1_norm();
      }
    }
  }

  [[nodiscard]] std::size_t dim() const noexcept { return kernels_.size(); }
  [[nodiscard]] const Vector& eta() const noexcept { return eta_; }
  [[nodiscard]] const Kernel& kernel(std::size_t i, std::size_t j) const {
    return kernels_.at(i).at(j);
  }
  [[nodiscard]] const std::vector<std::vector<Kernel>>& kernels() const noexcept {
    return kernels_;
  }
  /// M_ij = |h_ij|_1.
  [[nodiscard]] const Matrix& reproduction_matrix() const noexcept { return reproduction_; }

 private:
  Vector eta_;
  std::vector<std::vector<Kernel>> kernels_;
  Matrix reproduction_;
};

struct ModelSummary {
  Matrix reproduction;      // M
  double rho = 0.0;         // spectral radius of M
  Vector mean_intensity;    // m, solving (I - M^T) m = eta
  std::optional<double> moment_order;  // 1 + beta when a moment check was requested
  std::optional<double> nu;            // sup_ij moment(h_ij, 1 + beta)
};

inline constexpr const char* kSubcriticality = "subcriticality (spectral radius of M < 1)";

/// Throws HypothesisError unless rho(M) < 1.
inline double require_subcritical(const Matrix& reproduction) {
  const double rho = spectral_radius(reproduction);
  if (!(rho < 1.0)) {
    throw HypothesisError(kSubcriticality,
                          "spectral radius " + std::to_string(rho) + " is not < 1");
  }
  return rho;
}

/// Stationary mean intensities m = (I - M^T)^{-1} eta.
inline Vector mean_intensity(const HawkesModel& model) {
  const Matrix& mat = model.reproduction_matrix();
  require_subcritical(mat);
  const auto d = mat.rows();
  Vector m = (Matrix::Identity(d, d) - mat.transpose()).partialPivLu().solve(model.eta());
  if (!(m.array() > 0.0).all() || !m.allFinite()) {
    throw NumericError("mean intensity solve produced a non-positive entry");
  }
  return m;
}

/// nu_p = sup over nonzero kernels of the p-th delay moment.
inline double sup_kernel_moment(const HawkesModel& model, double p) {
  double nu = 0.0;
  for (const auto& row : model.kernels()) {
    for (const auto& k : row) {
      if (!k.is_zero()) nu = std::max(nu, k.moment(p));
    }
  }
  return nu;
}

/// Checks subcriticality and, when `beta` is given, finiteness of the
/// kernel moments of order 1 + beta. Throws HypothesisError naming the
/// violated hypothesis.
inline ModelSummary validate(const HawkesModel& model, std::optional<double> beta = std::nullopt) {
  ModelSummary s;
  s.reproduction = model.reproduction_matrix();
  s.rho = require_subcritical(s.reproduction);
  s.mean_intensity = mean_intensity(model);
  if (beta) {
    if (!(*beta > 0.0)) throw DomainError("moment exponent beta must be > 0");
    s.moment_order = 1.0 + *beta;
    s.nu = sup_kernel_moment(model, 1.0 + *beta);
  }
  return s;
}

}  // namespace hawkesmix
