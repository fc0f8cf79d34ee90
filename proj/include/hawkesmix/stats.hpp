#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hawkesmix/branching.hpp"
#include "hawkesmix/error.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/parallel.hpp"
#include "hawkesmix/rng.hpp"
#include "hawkesmix/simulate.hpp"
#include "hawkesmix/spectrum.hpp"
#include "hawkesmix/test_function.hpp"

namespace hawkesmix {

// ---------------------------------------------------------------- KS tests

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(K > x) for the Kolmogorov distribution.
inline double kolmogorov_survival(double x) {
  if (!(x > 0.0)) return 1.0;
  if (x < 1.18) {
    // P(K <= x) = sqrt(2 pi)/x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double f = -std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double term = std::exp(f * (2 * k - 1) * (2 * k - 1));
      s += term;
      if (term < 1e-17 * s) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Asymptotic critical value of sqrt(n) D at the given level.
inline double ks_critical(std::size_t n, double level = 0.01) {
  if (n == 0) throw DomainError("KS test needs at least one observation");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("KS level must lie in (0, 1)");
  // invert kolmogorov_survival by bisection
  double lo = 0.2, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_survival(mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) / std::sqrt(static_cast<double>(n));
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // effective sample size
};

inline KsResult ks_one_sample_normal(std::vector<double> x) {
  if (x.empty()) throw DomainError("KS test needs at least one observation");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = normal_cdf(x[k]);
    d = std::max({d, (static_cast<double>(k) + 1.0) / n - f, f - static_cast<double>(k) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d), x.size()};
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(ne) * d), static_cast<std::size_t>(std::llround(ne))};
}

/// Inter-event times of every component, pooled.
inline std::vector<double> inter_event_times(const EventLog& log) {
  std::vector<double> out;
  for (const auto& ev : log.events) {
    for (std::size_t k = 1; k < ev.size(); ++k) out.push_back(ev[k] - ev[k - 1]);
  }
  return out;
}

// ------------------------------------------------------------- statistics

/// S_t = sum_i [sum_{events of i in (0, t]} f_i - m_i int_0^t f_i] at each of
/// the increasing `times`, in one pass over the log.
inline std::vector<double> partial_statistics(const EventLog& log, const Vector& m, const TestFunction& f,
                                              const std::vector<double>& times) {
  if (f.dim() != log.dim || static_cast<std::size_t>(m.size()) != log.dim) {
    throw DomainError("test function dimension does not match the event log");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0) || times[k] > log.horizon || (k > 0 && times[k] < times[k - 1])) {
      throw DomainError("statistic times must be increasing within (0, horizon]");
    }
  }
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t i = 0; i < log.dim; ++i) {
    const auto& ev = log.events[i];
    std::size_t e = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (; e < ev.size() && ev[e] <= times[k]; ++e) {
        if (ev[e] > 0.0) sum += value(f[i], ev[e]);
      }
      out[k] += sum - m(static_cast<Eigen::Index>(i)) * integral(f[i], times[k]);
    }
  }
  return out;
}

inline double statistic_ST(const EventLog& log, const HawkesModel& model, const TestFunction& f, double horizon) {
  return partial_statistics(log, mean_intensity(model), f, {horizon}).front();
}

// ------------------------------------------------------------ time change

struct TimeChangePoint {
  double u = 0.0;
  double t = 0.0;         // v_T(u)
  double sigma2_t = 0.0;  // sigma_t^2 at t
};

struct TimeChange {
  double horizon = 0.0;
  double grid_step = 0.0;
  double sigma2_T = 0.0;
  std::vector<TimeChangePoint> points;
  std::size_t evaluations = 0;
};

/// v_T(u) = first grid point t with sigma_t^2 / sigma_T^2 >= u, for each u in
/// (0, 1]. sigma_t^2 is evaluated lazily by bisection over the grid
/// {step, 2 step, ..., T}; every evaluated value is checked for monotonicity.
inline TimeChange time_change(VarianceIntegrator& integ, const std::vector<double>& us, double grid_step = 0.0) {
  const double horizon = integ.max_horizon();
  if (grid_step == 0.0) grid_step = horizon / 1000.0;
  if (!(grid_step > 0.0) || grid_step > horizon) throw DomainError("time-change grid step must lie in (0, T]");
  const auto n = static_cast<std::size_t>(std::ceil(horizon / grid_step * (1.0 - 1e-12)));
  auto grid_t = [&](std::size_t g) { return g >= n ? horizon : static_cast<double>(g) * grid_step; };

  std::map<std::size_t, VarianceReport> cache;
  auto sigma2 = [&](std::size_t g) -> const VarianceReport& {
    auto it = cache.find(g);
    if (it == cache.end()) it = cache.emplace(g, integ.variance(grid_t(g))).first;
    return it->second;
  };

  TimeChange tc;
  tc.horizon = horizon;
  tc.grid_step = grid_step;
  tc.sigma2_T = sigma2(n).value;
  if (!(tc.sigma2_T > 0.0)) throw DomainError("time change needs sigma_T^2 > 0");
  for (double u : us) {
    if (!(u > 0.0 && u <= 1.0)) throw DomainError("time-change level u must lie in (0, 1]");
    const double target = u * tc.sigma2_T * (1.0 - 1e-12);
    std::size_t lo = 0, hi = n;  // invariant: ratio(hi) >= u; lo is below or the empty start
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      (sigma2(mid).value >= target ? hi : lo) = mid;
    }
    tc.points.push_back({u, grid_t(hi), sigma2(hi).value});
  }
  const VarianceReport* prev = nullptr;
  for (const auto& [g, rep] : cache) {
    if (prev) {
      const double tol = 1e-9 * tc.sigma2_T + prev->quad_error + rep.quad_error + prev->tail_bound + rep.tail_bound;
      if (rep.value < prev->value - tol) {
        throw NumericError("sigma_t^2 decreases along the time-change grid at t = " + std::to_string(grid_t(g)));
      }
    }
    prev = &rep;
  }
  tc.evaluations = cache.size();
  return tc;
}

inline TimeChange time_change(const HawkesModel& model, const TestFunction& f, double horizon,
                              const std::vector<double>& us, double grid_step = 0.0) {
  VarianceIntegrator integ(model, f, horizon);
  return time_change(integ, us, grid_step);
}

struct PathSample {
  std::vector<double> u;
  std::vector<double> w;  // W_T(u) = S_{v_T(u)} / sigma_T
  double sigma_T = 0.0;
};

inline PathSample path_sample(const EventLog& log, const Vector& m, const TestFunction& f, const TimeChange& tc) {
  PathSample p;
  p.sigma_T = std::sqrt(tc.sigma2_T);
  std::vector<double> times;
  for (const auto& pt : tc.points) {
    p.u.push_back(pt.u);
    times.push_back(pt.t);
  }
  p.w = partial_statistics(log, m, f, times);
  for (double& x : p.w) x /= p.sigma_T;
  return p;
}

// ---------------------------------------------------------------- harness

/// Seed of replicate r; independent of scheduling.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t r) {
  return splitmix64(splitmix64(master) ^ splitmix64(r + 0xD1B54A32D192ED03ULL));
}

inline constexpr const char* kCltRate = "mixing-rate condition ((beta - 1) delta > 2)";

struct HarnessOptions {
  double beta = 3.0;
  double delta = 2.0;
  std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  Simulator simulator = Simulator::Cluster;
  std::optional<double> burn_in;  // default_burn_in when unset
  double grid_step = 0.0;         // T / 1000 when 0
  double ks_level = 0.01;
  std::size_t threads = 0;
};

struct HarnessReport {
  std::size_t replicates = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double burn_in = 0.0;
  double sigma2_T = 0.0;
  TimeChange time_change;
  std::vector<double> z;            // sigma_T^{-1} S_T per replicate
  std::vector<std::vector<double>> paths;  // W_T(u_g) per replicate
  double z_mean = 0.0;
  double z_mean_se = 0.0;
  double var_w1 = 0.0;
  double var_w1_se = 0.0;
  bool var_pass = false;            // |Var W(1) - 1| <= 3 se
  KsResult ks;
  double ks_critical = 0.0;         // on the D scale
  bool ks_pass = false;
  Matrix cov;
  Matrix cov_target;
  double cov_max_deviation = 0.0;
  double cov_tolerance = 0.0;       // 4 / sqrt(R)
  bool cov_pass = false;

  [[nodiscard]] bool passed() const { return ks_pass && cov_pass; }
};

inline void check_clt_hypotheses(const HawkesModel& model, const TestFunction& f, double beta, double delta) {
  if (f.dim() != model.dim()) throw DomainError("test function dimension does not match the model");
  if (!(delta > 0.0)) throw DomainError("delta must be > 0");
  if (!((beta - 1.0) * delta > 2.0)) {
    throw HypothesisError(kCltRate, "(beta - 1) delta = " + std::to_string((beta - 1.0) * delta) + " <= 2");
  }
  (void)validate(model, beta);
}

inline HarnessReport clt_harness(const HawkesModel& model, const TestFunction& f, double horizon, std::size_t replicates,
                                 std::uint64_t seed, const HarnessOptions& opt = {}) {
  check_clt_hypotheses(model, f, opt.beta, opt.delta);
  if (replicates < 2) throw DomainError("harness needs at least two replicates");
  if (opt.grid.empty() || opt.grid.back() != 1.0) throw DomainError("harness grid must end at u = 1");
  for (std::size_t g = 0; g < opt.grid.size(); ++g) {
    if (!(opt.grid[g] > 0.0) || (g > 0 && !(opt.grid[g] > opt.grid[g - 1]))) {
      throw DomainError("harness grid must be strictly increasing in (0, 1]");
    }
  }
  HarnessReport rep;
  rep.replicates = replicates;
  rep.horizon = horizon;
  rep.seed = seed;
  rep.burn_in = opt.burn_in ? *opt.burn_in : default_burn_in(model);
  const Vector m = mean_intensity(model);
  {
    VarianceIntegrator integ(model, f, horizon);
    rep.time_change = time_change(integ, opt.grid, opt.grid_step);
  }
  rep.sigma2_T = rep.time_change.sigma2_T;

  const std::size_t g_count = opt.grid.size();
  rep.paths.assign(replicates, {});
  parallel_for(replicates, opt.threads, [&](std::size_t r) {
    const EventLog log = simulate(model, opt.simulator, horizon, rep.burn_in, replicate_seed(seed, r));
    rep.paths[r] = path_sample(log, m, f, rep.time_change).w;
  });

  const double n = static_cast<double>(replicates);
  rep.z.resize(replicates);
  for (std::size_t r = 0; r < replicates; ++r) rep.z[r] = rep.paths[r].back();

  double s = 0.0, s2 = 0.0;
  for (double z : rep.z) s += z;
  rep.z_mean = s / n;
  for (double z : rep.z) s2 += (z - rep.z_mean) * (z - rep.z_mean);
  rep.var_w1 = s2 / (n - 1.0);
  rep.z_mean_se = std::sqrt(rep.var_w1 / n);
  double m4 = 0.0;
  for (double z : rep.z) m4 += std::pow(z - rep.z_mean, 4);
  m4 /= n;
  rep.var_w1_se = std::sqrt(std::max(m4 - rep.var_w1 * rep.var_w1, 0.0) / n);
  rep.var_pass = std::abs(rep.var_w1 - 1.0) <= 3.0 * rep.var_w1_se;

  rep.ks = ks_one_sample_normal(rep.z);
  rep.ks_critical = ks_critical(replicates, opt.ks_level);
  rep.ks_pass = rep.ks.statistic < rep.ks_critical;

  const auto gi = static_cast<Eigen::Index>(g_count);
  Vector mean = Vector::Zero(gi);
  for (const auto& p : rep.paths)
    for (Eigen::Index a = 0; a < gi; ++a) mean(a) += p[static_cast<std::size_t>(a)];
  mean /= n;
  rep.cov = Matrix::Zero(gi, gi);
  for (const auto& p : rep.paths) {
    for (Eigen::Index a = 0; a < gi; ++a)
      for (Eigen::Index b = 0; b < gi; ++b)
        rep.cov(a, b) += (p[static_cast<std::size_t>(a)] - mean(a)) * (p[static_cast<std::size_t>(b)] - mean(b));
  }
  rep.cov /= (n - 1.0);
  rep.cov_target = Matrix(gi, gi);
  for (Eigen::Index a = 0; a < gi; ++a)
    for (Eigen::Index b = 0; b < gi; ++b)
      rep.cov_target(a, b) = std::min(opt.grid[static_cast<std::size_t>(a)], opt.grid[static_cast<std::size_t>(b)]);
  rep.cov_max_deviation = (rep.cov - rep.cov_target).cwiseAbs().maxCoeff();
  rep.cov_tolerance = 4.0 / std::sqrt(n);
  rep.cov_pass = rep.cov_max_deviation < rep.cov_tolerance;
  return rep;
}

// ------------------------------------------------------- decay diagnostic

struct DecayOptions {
  double beta = 1.4;
  double gamma = 0.5;
  Simulator simulator = Simulator::Cluster;
  std::optional<double> burn_in;
  std::size_t threads = 0;
};

struct DecayRow {
  double lag = 0.0;        // B = (lag, lag + w]
  double empirical = 0.0;  // sample Cov(N_i((0, w]), N_j(B))
  double se = 0.0;
  double model = 0.0;      // cov_counts
  double bound = 0.0;      // pair bound at gap lag - w
  [[nodiscard]] bool within_bound() const { return std::abs(empirical) <= bound; }
  [[nodiscard]] double z_model() const { return se > 0.0 ? (empirical - model) / se : 0.0; }
};

struct DecayReport {
  std::size_t i = 0, j = 0;
  double window = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  double burn_in = 0.0;
  MixingBoundReport bound;
  std::vector<DecayRow> rows;
};

inline DecayReport mixing_decay_diagnostic(const HawkesModel& model, std::size_t i, std::size_t j, double window,
                                           const std::vector<double>& lags, std::size_t replicates,
                                           std::uint64_t seed, const DecayOptions& opt = {}) {
  if (i >= model.dim() || j >= model.dim()) throw DomainError("component index out of range");
  if (!(window > 0.0) || !std::isfinite(window)) throw DomainError("window length must be > 0");
  if (lags.empty()) throw DomainError("decay diagnostic needs at least one lag");
  if (replicates < 2) throw DomainError("decay diagnostic needs at least two replicates");
  std::vector<double> gaps;
  std::vector<Interval> bs;
  for (double lag : lags) {
    if (!(lag > window) || !std::isfinite(lag)) throw DomainError("lags must exceed the window length");
    gaps.push_back(lag - window);
    bs.push_back({lag, lag + window});
  }
  DecayReport rep;
  rep.i = i;
  rep.j = j;
  rep.window = window;
  rep.replicates = replicates;
  rep.seed = seed;
  rep.burn_in = opt.burn_in ? *opt.burn_in : default_burn_in(model);
  rep.bound = mixing_bound(model, opt.beta, opt.gamma, gaps);
  const auto model_cov = cov_counts_many(model, i, j, {0.0, window}, bs);

  const double horizon = *std::max_element(lags.begin(), lags.end()) + window;
  const std::size_t n_lags = lags.size();
  std::vector<std::vector<double>> counts(replicates);  // [x, y_1, ..., y_L]
  parallel_for(replicates, opt.threads, [&](std::size_t r) {
    const EventLog log = simulate(model, opt.simulator, horizon, rep.burn_in, replicate_seed(seed, r));
    auto& c = counts[r];
    c.push_back(static_cast<double>(count(log, i, 0.0, window)));
    for (const auto& b : bs) c.push_back(static_cast<double>(count(log, j, b.a, b.b)));
  });

  const double n = static_cast<double>(replicates);
  double mx = 0.0;
  for (const auto& c : counts) mx += c[0];
  mx /= n;
  for (std::size_t l = 0; l < n_lags; ++l) {
    double my = 0.0;
    for (const auto& c : counts) my += c[l + 1];
    my /= n;
    double s = 0.0, s2 = 0.0;
    for (const auto& c : counts) {
      const double p = (c[0] - mx) * (c[l + 1] - my);
      s += p;
      s2 += p * p;
    }
    DecayRow row;
    row.lag = lags[l];
    row.empirical = s / (n - 1.0);
    const double mp = s / n;
    row.se = std::sqrt(std::max(s2 / n - mp * mp, 0.0) / n);
    row.model = model_cov.values[l];
    row.bound = rep.bound.pair_bound_at(i, j, gaps[l]);
    rep.rows.push_back(row);
  }
  return rep;
}

/// Least-squares slope of log|y| against log x.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs two or more matching points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || y[k] == 0.0) throw DomainError("log-log slope needs x > 0 and y != 0");
    const double lx = std::log(x[k]), ly = std::log(std::abs(y[k]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hawkesmix
