#pragma once

// Gauss-Kronrod quadrature: a single 7/15 panel rule, fixed composite
// panels, and a globally adaptive driver in the style of QUADPACK's QAG.
// Value types may be real, complex, or Eigen arrays; errors are measured
// with `magnitude`.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <queue>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hawkesmix/error.hpp"

namespace hawkesmix::quad {

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z); }
template <class Derived>
double magnitude(const Eigen::DenseBase<Derived>& a) {
  return a.size() == 0 ? 0.0 : a.derived().cwiseAbs().maxCoeff();
}

template <class T>
struct Estimate {
  T value;
  double error = 0.0;
};

namespace detail {

// Kronrod abscissae (positive half, descending) and weights; Gauss weights
// apply to the odd-indexed Kronrod nodes plus the centre.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
T zero_like(const T& sample) {
  if constexpr (std::is_arithmetic_v<T>) {
    return T{0};
  } else if constexpr (std::is_same_v<T, std::complex<double>>) {
    return T{0.0, 0.0};
  } else {
    T z = sample;
    z.setZero();
    return z;
  }
}

}  // namespace detail

/// One 15-point Kronrod panel with the embedded 7-point Gauss estimate.
template <class F>
auto gk15(F&& f, double a, double b) {
  using T = std::decay_t<std::invoke_result_t<F&, double>>;
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(centre);
  T kronrod = fc * detail::kWgk[7];
  T gauss = fc * detail::kWg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * detail::kXgk[j];
    const T sum = f(centre - dx) + f(centre + dx);
    kronrod = kronrod + sum * detail::kWgk[j];
    if (j % 2 == 1) gauss = gauss + sum * detail::kWg[j / 2];
  }
  kronrod = kronrod * half;
  gauss = gauss * half;
  const double err = magnitude(kronrod - gauss);
  return Estimate<T>{std::move(kronrod), err};
}

/// Fixed composite rule: `panels` equal GK15 panels on [a, b], summed
/// left to right.
template <class F>
auto composite(F&& f, double a, double b, std::size_t panels) {
  using T = std::decay_t<std::invoke_result_t<F&, double>>;
  panels = std::max<std::size_t>(panels, 1);
  const double h = (b - a) / static_cast<double>(panels);
  auto first = gk15(f, a, panels == 1 ? b : a + h);
  T total = first.value;
  double err = first.error;
  for (std::size_t p = 1; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double hi = p + 1 == panels ? b : lo + h;
    auto e = gk15(f, lo, hi);
    total = total + e.value;
    err += e.error;
  }
  return Estimate<T>{std::move(total), err};
}

struct AdaptiveOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  std::size_t initial_panels = 1;
  std::size_t max_panels = 200000;
};

/// Globally adaptive GK15: repeatedly bisects the panel with the largest
/// error estimate until the summed error meets max(abs_tol, rel_tol*|I|).
/// Throws NumericError when the panel budget runs out.
template <class F>
auto adaptive(F&& f, double a, double b, const AdaptiveOptions& opt = {}) {
  using T = std::decay_t<std::invoke_result_t<F&, double>>;
  struct Panel {
    double lo, hi;
    Estimate<T> est;
    std::size_t order;
  };
  auto cmp = [](const Panel& x, const Panel& y) {
    if (x.est.error != y.est.error) return x.est.error < y.est.error;
    return x.order > y.order;
  };
  std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp);

  const std::size_t n0 = std::max<std::size_t>(opt.initial_panels, 1);
  const double h = (b - a) / static_cast<double>(n0);
  std::size_t order = 0;
  double err_total = 0.0;
  for (std::size_t p = 0; p < n0; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double hi = p + 1 == n0 ? b : lo + h;
    auto e = gk15(f, lo, hi);
    err_total += e.error;
    heap.push(Panel{lo, hi, std::move(e), order++});
  }

  T total = detail::zero_like(heap.top().est.value);
  {
    auto copy = heap;
    std::vector<Panel> store;
    while (!copy.empty()) {
      store.push_back(copy.top());
      copy.pop();
    }
    std::sort(store.begin(), store.end(),
              [](const Panel& x, const Panel& y) { return x.lo < y.lo; });
    for (const auto& p : store) total = total + p.est.value;
  }

  while (err_total > std::max(opt.abs_tol, opt.rel_tol * magnitude(total))) {
    if (heap.size() >= opt.max_panels) {
      throw NumericError("adaptive quadrature did not converge on [" +
                         std::to_string(a) + ", " + std::to_string(b) +
                         "]: error estimate " + std::to_string(err_total));
    }
    Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw NumericError("adaptive quadrature: panel below machine resolution");
    }
    auto left = gk15(f, worst.lo, mid);
    auto right = gk15(f, mid, worst.hi);
    err_total += left.error + right.error - worst.est.error;
    total = total + (left.value + right.value - worst.est.value);
    heap.push(Panel{worst.lo, mid, std::move(left), order++});
    heap.push(Panel{mid, worst.hi, std::move(right), order++});
  }

  // Final value re-summed in panel-position order.
  std::vector<Panel> store;
  store.reserve(heap.size());
  while (!heap.empty()) {
    store.push_back(heap.top());
    heap.pop();
  }
  std::sort(store.begin(), store.end(),
            [](const Panel& x, const Panel& y) { return x.lo < y.lo; });
  total = detail::zero_like(total);
  double err = 0.0;
  for (const auto& p : store) {
    total = total + p.est.value;
    err += p.est.error;
  }
  return Estimate<T>{std::move(total), err};
}

}  // namespace hawkesmix::quad
