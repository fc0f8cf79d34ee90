#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "hawkesmix/error.hpp"
#include "hawkesmix/kernel.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix {

enum class Simulator { Cluster, Thinning };

inline std::string_view to_string(Simulator s) {
  return s == Simulator::Cluster ? "cluster" : "thinning";
}

inline Simulator simulator_from_string(std::string_view name) {
  if (name == "cluster") return Simulator::Cluster;
  if (name == "thinning") return Simulator::Thinning;
  throw DomainError("unknown simulator '" + std::string(name) + "'");
}

struct EventLogMeta {
  std::uint64_t seed = 0;
  Simulator simulator = Simulator::Cluster;
  double burn_in = 0.0;
};

/// Event times of each component on [0, horizon], strictly increasing.
struct EventLog {
  std::size_t dim = 0;
  double horizon = 0.0;
  std::vector<std::vector<double>> events;
  EventLogMeta meta;

  [[nodiscard]] std::size_t total_events() const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.size();
    return n;
  }
};

/// N_i((a, b]). The interval must lie inside the observation window.
inline std::size_t count(const EventLog& log, std::size_t component, double a, double b) {
  if (component >= log.dim) throw DomainError("component index out of range");
  if (!(a >= 0.0 && b <= log.horizon && a <= b)) {
    throw DomainError("count interval must satisfy 0 <= a <= b <= horizon");
  }
  const auto& ev = log.events[component];
  const auto lo = std::upper_bound(ev.begin(), ev.end(), a);
  const auto hi = std::upper_bound(ev.begin(), ev.end(), b);
  return static_cast<std::size_t>(hi - lo);
}

/// One individual of the branching representation.
struct Individual {
  double time;
  std::uint32_t type;
  std::uint32_t generation;  // 0 for immigrants
  std::int64_t parent;       // -1 for immigrants
};

/// Ancestry of every simulated individual, including those later dropped
/// for lying outside the observation window.
struct ClusterTrace {
  std::vector<Individual> individuals;
};

inline constexpr std::uint32_t kMaxGenerations = 10000;

/// Default burn-in: the larger of (a) the smallest B with total kernel tail
/// mass sum_ij int_B^inf h_ij < 1e-6 * min_j eta_j and (b) ten times the
/// cluster-duration proxy  max_ij mean_delay(h_ij) / (1 - rho).
inline double default_burn_in(const HawkesModel& model) {
  const double rho = require_subcritical(model.reproduction_matrix());
  const double target = 1e-6 * model.eta().minCoeff();
  auto tail = [&model](double b) {
    double s = 0.0;
    for (const auto& row : model.kernels())
      for (const auto& k : row) s += k.tail_mass(b);
    return s;
  };
  double tail_b = 0.0;
  if (tail(0.0) >= target) {
    double hi = 1.0;
    while (tail(hi) >= target) {
      hi *= 2.0;
      if (hi > 1e12) throw NumericError("default_burn_in: kernel tails decay too slowly");
    }
    double lo = hi / 2.0;
    if (tail(lo) < target) lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (tail(mid) < target ? hi : lo) = mid;
    }
    tail_b = hi;
  }
  double max_mean = 0.0;
  for (const auto& row : model.kernels())
    for (const auto& k : row) max_mean = std::max(max_mean, k.mean_delay());
  return std::max(tail_b, 10.0 * max_mean / (1.0 - rho));
}

namespace detail {

inline void check_horizon(double horizon, double burn_in) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be > 0");
  if (!(burn_in >= 0.0) || !std::isfinite(burn_in)) throw DomainError("burn-in must be >= 0");
}

// Rejects exact repeats of any time already used, across all components.
class TieGuard {
 public:
  bool insert(double t) { return seen_.insert(t).second; }

 private:
  std::unordered_set<double> seen_;
};

// Grows the offspring of `individuals[from...]` breadth first. Offspring
// counts are Poisson(M_ij) with i.i.d. delays from h_ij / |h_ij|_1.
inline void grow_clusters(const HawkesModel& model, std::vector<Individual>& individuals,
                          std::size_t from, Rng& rng, TieGuard& ties) {
  const Matrix& mat = model.reproduction_matrix();
  const auto d = model.dim();
  for (std::size_t idx = from; idx < individuals.size(); ++idx) {
    const Individual parent = individuals[idx];
    for (std::size_t j = 0; j < d; ++j) {
      const double mean = mat(parent.type, static_cast<Eigen::Index>(j));
      if (mean <= 0.0) continue;
      const std::uint64_t n = poisson(rng, mean);
      if (n == 0) continue;
      if (parent.generation + 1 > kMaxGenerations) {
        throw NumericError("cluster exceeded " + std::to_string(kMaxGenerations) +
                           " generations; check the reproduction matrix");
      }
      const Kernel& k = model.kernel(parent.type, j);
      for (std::uint64_t c = 0; c < n; ++c) {
        double t = parent.time + k.sample_delay(rng);
        while (!ties.insert(t)) t = parent.time + k.sample_delay(rng);
        individuals.push_back(Individual{t, static_cast<std::uint32_t>(j),
                                         parent.generation + 1,
                                         static_cast<std::int64_t>(idx)});
      }
    }
  }
}

inline EventLog collect_window(const std::vector<Individual>& individuals, std::size_t d,
                               double horizon, EventLogMeta meta) {
  EventLog log;
  log.dim = d;
  log.horizon = horizon;
  log.meta = meta;
  log.events.assign(d, {});
  for (const auto& ind : individuals) {
    if (ind.time >= 0.0 && ind.time <= horizon) log.events[ind.type].push_back(ind.time);
  }
  for (auto& e : log.events) std::sort(e.begin(), e.end());
  return log;
}

}  // namespace detail

/// Cluster (branching) simulation on [-burn_in, horizon]: homogeneous
/// Poisson immigrants, Poisson offspring counts with i.i.d. delays,
/// recursion to extinction, then restriction to [0, horizon].
inline EventLog simulate_cluster(const HawkesModel& model, double horizon, double burn_in,
                                 std::uint64_t seed, ClusterTrace* trace = nullptr) {
  detail::check_horizon(horizon, burn_in);
  require_subcritical(model.reproduction_matrix());
  Rng rng = make_stream(seed);
  detail::TieGuard ties;
  std::vector<Individual> individuals;
  const auto d = model.dim();
  for (std::size_t j = 0; j < d; ++j) {
    const double rate = model.eta()(static_cast<Eigen::Index>(j));
    double t = -burn_in;
    while (true) {
      double next = t + exponential(rng, rate);
      while (!ties.insert(next)) next = t + exponential(rng, rate);
      if (next > horizon) break;
      individuals.push_back(Individual{next, static_cast<std::uint32_t>(j), 0, -1});
      t = next;
    }
  }
  detail::grow_clusters(model, individuals, 0, rng, ties);
  EventLog log = detail::collect_window(individuals, d, horizon,
                                        EventLogMeta{seed, Simulator::Cluster, burn_in});
  if (trace) trace->individuals = std::move(individuals);
  return log;
}

/// One cluster grown from a single ancestor of type `ancestor` at time 0.
inline ClusterTrace simulate_single_cluster(const HawkesModel& model, std::size_t ancestor,
                                            Rng& rng) {
  if (ancestor >= model.dim()) throw DomainError("ancestor type out of range");
  require_subcritical(model.reproduction_matrix());
  detail::TieGuard ties;
  ClusterTrace trace;
  ties.insert(0.0);
  trace.individuals.push_back(Individual{0.0, static_cast<std::uint32_t>(ancestor), 0, -1});
  detail::grow_clusters(model, trace.individuals, 0, rng, ties);
  return trace;
}

namespace detail {

// Excitation sum  sum_{T_k <= s} h(s - T_k)  from one source component,
// queried at non-decreasing times.
class Excitation {
 public:
  explicit Excitation(const Kernel& k) : kernel_(&k) {
    if (const auto* e = std::get_if<Exponential>(&k.family())) {
      state_ = ExpState{e->alpha * e->beta, e->beta, 0.0, 0.0};
    } else if (const auto* u = std::get_if<Uniform>(&k.family())) {
      state_ = UniformState{u->alpha / u->support, u->support, {}};
    } else if (k.is_zero()) {
      state_ = ZeroState{};
    } else {
      state_ = HistoryState{};
    }
  }

  double value(double s) {
    return std::visit(
        [&](auto& st) -> double {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, ExpState>) {
            return st.value * std::exp(-st.beta * (s - st.updated));
          } else if constexpr (std::is_same_v<S, UniformState>) {
            while (!st.times.empty() && s - st.times.front() > st.support) st.times.pop_front();
            return st.height * static_cast<double>(st.times.size());
          } else if constexpr (std::is_same_v<S, HistoryState>) {
            double acc = 0.0;
            for (double t : st.times) acc += kernel_->evaluate_unchecked(s - t);
            return acc;
          } else {
            return 0.0;
          }
        },
        state_);
  }

  void add(double t) {
    std::visit(
        [&](auto& st) {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, ExpState>) {
            st.value = st.value * std::exp(-st.beta * (t - st.updated)) + st.jump;
            st.updated = t;
          } else if constexpr (std::is_same_v<S, UniformState> ||
                               std::is_same_v<S, HistoryState>) {
            st.times.push_back(t);
          }
        },
        state_);
  }

 private:
  struct ExpState {
    double jump, beta, value, updated;
  };
  struct UniformState {
    double height, support;
    std::deque<double> times;
  };
  struct HistoryState {
    std::vector<double> times;
  };
  struct ZeroState {};

  const Kernel* kernel_;
  std::variant<ZeroState, ExpState, UniformState, HistoryState> state_;
};

}  // namespace detail

struct ThinningStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double min_ratio = 1.0;  // smallest lambda / lambda_bar seen
  double max_ratio = 0.0;
};

/// Ogata thinning on [-burn_in, horizon]. After each proposal or event the
/// total intensity just to the right of the current time dominates the
/// intensity until the next event, since every kernel is non-increasing.
inline EventLog simulate_thinning(const HawkesModel& model, double horizon, double burn_in,
                                  std::uint64_t seed, ThinningStats* stats = nullptr) {
  detail::check_horizon(horizon, burn_in);
  require_subcritical(model.reproduction_matrix());
  static_assert(Kernel::non_increasing());
  const auto d = model.dim();
  Rng rng = make_stream(seed);

  // excitation[i * d + j]: contribution of source i to the intensity of j.
  std::vector<detail::Excitation> excitation;
  excitation.reserve(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) excitation.emplace_back(model.kernel(i, j));

  std::vector<double> jump_at_zero(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      jump_at_zero[i * d + j] = model.kernel(i, j).evaluate_unchecked(0.0);

  EventLog log;
  log.dim = d;
  log.horizon = horizon;
  log.meta = EventLogMeta{seed, Simulator::Thinning, burn_in};
  log.events.assign(d, {});

  ThinningStats local;
  std::vector<double> lambda(d);
  double t = -burn_in;
  double bound = model.eta().sum();
  while (true) {
    const double s = t + exponential(rng, bound);
    if (s > horizon) break;
    if (s == t) continue;  // proposal lost to rounding; redraw
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double l = model.eta()(static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < d; ++i) l += excitation[i * d + j].value(s);
      lambda[j] = l;
      total += l;
    }
    if (total > bound * (1.0 + 1e-12)) {
      throw NumericError("thinning: intensity exceeded its dominating bound");
    }
    const double ratio = total / bound;
    ++local.proposals;
    local.min_ratio = std::min(local.min_ratio, ratio);
    local.max_ratio = std::max(local.max_ratio, ratio);
    const double u = uniform_open(rng) * bound;
    t = s;
    if (u >= total) {
      bound = total;
      continue;
    }
    std::size_t comp = 0;
    double cum = lambda[0];
    while (u >= cum && comp + 1 < d) cum += lambda[++comp];
    ++local.accepted;
    if (s >= 0.0) log.events[comp].push_back(s);
    double jump = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      excitation[comp * d + j].add(s);
      jump += jump_at_zero[comp * d + j];
    }
    bound = total + jump;
  }
  if (stats) *stats = local;
  return log;
}

inline EventLog simulate(const HawkesModel& model, Simulator which, double horizon,
                         double burn_in, std::uint64_t seed) {
  return which == Simulator::Cluster ? simulate_cluster(model, horizon, burn_in, seed)
                                     : simulate_thinning(model, horizon, burn_in, seed);
}

}  // namespace hawkesmix
