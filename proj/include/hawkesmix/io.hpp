#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hawkesmix/branching.hpp"
#include "hawkesmix/error.hpp"
#include "hawkesmix/kernel.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/simulate.hpp"
#include "hawkesmix/spectrum.hpp"
#include "hawkesmix/stats.hpp"
#include "hawkesmix/test_function.hpp"

namespace hawkesmix {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Malformed or schema-violating configuration; `pointer` locates the value.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& detail)
      : Error((pointer.empty() ? std::string("/") : pointer) + ": " + detail), pointer_(std::move(pointer)) {}
  [[nodiscard]] const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

namespace io {

inline std::string child(const std::string& ptr, std::string_view key) {
  std::string k;
  for (char c : key) {
    if (c == '~') k += "~0";
    else if (c == '/') k += "~1";
    else k += c;
  }
  return ptr + "/" + k;
}

inline std::string child(const std::string& ptr, std::size_t index) { return ptr + "/" + std::to_string(index); }

inline void require_object(const Json& j, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
}

inline void check_keys(const Json& j, const std::string& ptr, std::initializer_list<std::string_view> allowed) {
  require_object(j, ptr);
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(child(ptr, key), "unknown key");
    }
  }
}

inline const Json& member(const Json& j, const std::string& ptr, std::string_view key) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError(child(ptr, key), "missing required key");
  return *it;
}

inline double as_number(const Json& v, const std::string& ptr) {
  if (!v.is_number()) throw ConfigError(ptr, "expected a number");
  return v.get<double>();
}

inline std::uint64_t as_uint(const Json& v, const std::string& ptr) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(ptr, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string as_string(const Json& v, const std::string& ptr) {
  if (!v.is_string()) throw ConfigError(ptr, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> as_numbers(const Json& v, const std::string& ptr) {
  if (!v.is_array()) throw ConfigError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], child(ptr, k)));
  return out;
}

inline double number(const Json& j, const std::string& ptr, std::string_view key) {
  return as_number(member(j, ptr, key), child(ptr, key));
}

inline double number_or(const Json& j, const std::string& ptr, std::string_view key, double fallback) {
  return j.contains(std::string(key)) ? number(j, ptr, key) : fallback;
}

inline std::optional<double> optional_number(const Json& j, const std::string& ptr, std::string_view key) {
  if (!j.contains(std::string(key))) return std::nullopt;
  return number(j, ptr, key);
}

inline std::uint64_t uint(const Json& j, const std::string& ptr, std::string_view key) {
  return as_uint(member(j, ptr, key), child(ptr, key));
}

/// Runs `fn`, rethrowing library argument errors as ConfigError at `ptr`.
template <class Fn>
auto at(const std::string& ptr, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw ConfigError(ptr, e.what());
  }
}

}  // namespace io

// ------------------------------------------------------------------ model

inline Kernel kernel_from_json(const Json& j, const std::string& ptr) {
  io::require_object(j, ptr);
  const std::string family = io::as_string(io::member(j, ptr, "family"), io::child(ptr, "family"));
  return io::at(ptr, [&] {
    if (family == "zero") {
      io::check_keys(j, ptr, {"family"});
      return Kernel::zero();
    }
    if (family == "exponential") {
      io::check_keys(j, ptr, {"family", "alpha", "beta"});
      return Kernel::exponential(io::number(j, ptr, "alpha"), io::number(j, ptr, "beta"));
    }
    if (family == "powerlaw") {
      io::check_keys(j, ptr, {"family", "alpha", "c", "theta"});
      return Kernel::power_law(io::number(j, ptr, "alpha"), io::number(j, ptr, "c"), io::number(j, ptr, "theta"));
    }
    if (family == "uniform") {
      io::check_keys(j, ptr, {"family", "alpha", "a"});
      return Kernel::uniform(io::number(j, ptr, "alpha"), io::number(j, ptr, "a"));
    }
    throw ConfigError(io::child(ptr, "family"), "unknown kernel family '" + family + "'");
  });
}

inline Json kernel_to_json(const Kernel& k) {
  return std::visit(
      [](const auto& f) -> Json {
        using K = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<K, Exponential>) return {{"family", "exponential"}, {"alpha", f.alpha}, {"beta", f.beta}};
        else if constexpr (std::is_same_v<K, PowerLaw>)
          return {{"family", "powerlaw"}, {"alpha", f.alpha}, {"c", f.scale}, {"theta", f.tail}};
        else if constexpr (std::is_same_v<K, Uniform>) return {{"family", "uniform"}, {"alpha", f.alpha}, {"a", f.support}};
        else return {{"family", "zero"}};
      },
      k.family());
}

/// {"eta": [...], "kernels": [[kernel, ...], ...]}; kernels[i][j] = h_ij.
inline HawkesModel model_from_json(const Json& j, const std::string& ptr = "") {
  io::check_keys(j, ptr, {"eta", "kernels"});
  const auto eta = io::as_numbers(io::member(j, ptr, "eta"), io::child(ptr, "eta"));
  const std::string kp = io::child(ptr, "kernels");
  const Json& kj = io::member(j, ptr, "kernels");
  if (!kj.is_array() || kj.size() != eta.size()) throw ConfigError(kp, "expected a d x d array of kernels");
  std::vector<std::vector<Kernel>> kernels;
  for (std::size_t i = 0; i < kj.size(); ++i) {
    const std::string rp = io::child(kp, i);
    if (!kj[i].is_array() || kj[i].size() != eta.size()) throw ConfigError(rp, "expected a row of d kernels");
    kernels.emplace_back();
    for (std::size_t c = 0; c < kj[i].size(); ++c) kernels.back().push_back(kernel_from_json(kj[i][c], io::child(rp, c)));
  }
  Vector e = Eigen::Map<const Vector>(eta.data(), static_cast<Eigen::Index>(eta.size()));
  return io::at(ptr, [&] { return HawkesModel(e, kernels); });
}

inline Json model_to_json(const HawkesModel& model) {
  Json j;
  j["eta"] = std::vector<double>(model.eta().data(), model.eta().data() + model.eta().size());
  Json rows = Json::array();
  for (const auto& row : model.kernels()) {
    Json r = Json::array();
    for (const auto& k : row) r.push_back(kernel_to_json(k));
    rows.push_back(r);
  }
  j["kernels"] = rows;
  return j;
}

// ---------------------------------------------------------- test function

inline Component component_from_json(const Json& j, const std::string& ptr) {
  io::require_object(j, ptr);
  const std::string type = io::as_string(io::member(j, ptr, "type"), io::child(ptr, "type"));
  Component c;
  if (type == "constant") {
    io::check_keys(j, ptr, {"type", "k"});
    c = Constant{io::number(j, ptr, "k")};
  } else if (type == "indicator") {
    io::check_keys(j, ptr, {"type", "a", "b", "weight"});
    c = Indicator{io::number(j, ptr, "a"), io::number(j, ptr, "b"), io::number_or(j, ptr, "weight", 1.0)};
  } else if (type == "trig") {
    io::check_keys(j, ptr, {"type", "period", "a0", "cos", "sin"});
    TrigPeriodic t;
    t.period = io::number(j, ptr, "period");
    t.a0 = io::number_or(j, ptr, "a0", 0.0);
    if (j.contains("cos")) t.cos = io::as_numbers(j["cos"], io::child(ptr, "cos"));
    if (j.contains("sin")) t.sin = io::as_numbers(j["sin"], io::child(ptr, "sin"));
    c = t;
  } else if (type == "step") {
    io::check_keys(j, ptr, {"type", "period", "values"});
    c = StepPeriodic{io::number(j, ptr, "period"), io::as_numbers(io::member(j, ptr, "values"), io::child(ptr, "values"))};
  } else if (type == "const_plus_indicator") {
    io::check_keys(j, ptr, {"type", "k", "a", "b", "weight"});
    c = ConstPlusIndicator{io::number(j, ptr, "k"), io::number(j, ptr, "a"), io::number(j, ptr, "b"),
                           io::number_or(j, ptr, "weight", 1.0)};
  } else {
    throw ConfigError(io::child(ptr, "type"), "unknown test function type '" + type + "'");
  }
  io::at(ptr, [&] { detail::check_component(c); });
  return c;
}

inline TestFunction test_function_from_json(const Json& j, const std::string& ptr, std::size_t dim) {
  if (!j.is_array() || j.size() != dim) {
    throw ConfigError(ptr, "expected an array of " + std::to_string(dim) + " test function components");
  }
  std::vector<Component> comps;
  for (std::size_t i = 0; i < j.size(); ++i) comps.push_back(component_from_json(j[i], io::child(ptr, i)));
  return TestFunction(std::move(comps));
}

// ------------------------------------------------------------- artifacts

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// CSV with a leading "# config_hash: ..." line.
class CsvWriter {
 public:
  CsvWriter(const std::string& config_hash, const std::vector<std::string>& header) {
    buf_ << "# config_hash: " << config_hash << "\n";
    bool first = true;
    for (const auto& h : header) {
      buf_ << (first ? "" : ",") << h;
      first = false;
    }
    buf_ << "\n";
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((buf_ << (first ? "" : ",") << cell(cells), first = false), ...);
    buf_ << "\n";
  }
  [[nodiscard]] std::string str() const { return buf_.str(); }

 private:
  static std::string cell(double x) { return fmt17(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }
  std::ostringstream buf_;
};

/// "component,time" rows in time order (ties by component).
inline std::string events_csv(const EventLog& log, const std::string& config_hash) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < log.dim; ++i)
    for (double t : log.events[i]) all.emplace_back(t, i);
  std::sort(all.begin(), all.end());
  CsvWriter csv(config_hash, {"component", "time"});
  for (const auto& [t, i] : all) csv.row(i, t);
  return csv.str();
}

// ------------------------------------------------------------ report json

inline Json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline Json to_json(const ModelSummary& s) {
  Json j;
  j["rho"] = s.rho;
  j["mean_intensity"] = to_json(s.mean_intensity);
  j["reproduction_matrix"] = to_json(s.reproduction);
  if (s.moment_order) j["moment_order"] = *s.moment_order;
  if (s.nu) j["nu"] = *s.nu;
  return j;
}

inline Json to_json(const ContractionCert& c) {
  return {{"rho", c.rho}, {"delta", c.delta}, {"u0", c.u0}, {"epsilon", c.epsilon},
          {"c", c.c},     {"k0", c.k0},       {"horizon", c.horizon}, {"u", to_json(c.u)}};
}

inline Json to_json(const MixingBoundReport& r) {
  Json j;
  j["beta"] = r.beta;
  j["gamma"] = r.gamma;
  j["p"] = r.p;
  j["q"] = r.q;
  j["r"] = r.r;
  j["q_mean"] = r.q_mean;
  j["nu"] = r.nu;
  j["certificate"] = to_json(r.cert);
  j["c1_p"] = r.c1_p;
  j["c1_q"] = r.c1_q;
  j["c1_q_mean"] = r.c1_q_mean;
  j["truncation"] = r.truncation;
  j["series_truncated"] = r.series_truncated;
  j["series_remainder"] = r.series_remainder;
  j["constant"] = r.constant;
  j["pair_constant"] = to_json(r.pair_constant);
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back({{"lag", row.lag}, {"bound", row.bound}});
  j["rows"] = rows;
  return j;
}

inline Json to_json(const VarianceReport& r) {
  return {{"value", r.value},         {"poisson_part", r.poisson_part}, {"quad_error", r.quad_error},
          {"tail_bound", r.tail_bound}, {"xi_max", r.xi_max},           {"panels", r.panels}};
}

inline Json to_json(const HarnessReport& r) {
  Json j;
  j["replicates"] = r.replicates;
  j["T"] = r.horizon;
  j["seed"] = r.seed;
  j["burn_in"] = r.burn_in;
  j["sigma2_T"] = r.sigma2_T;
  Json tc = Json::array();
  for (const auto& p : r.time_change.points) tc.push_back({{"u", p.u}, {"t", p.t}, {"sigma2_t", p.sigma2_t}});
  j["time_change"] = {{"grid_step", r.time_change.grid_step}, {"points", tc}};
  j["z_mean"] = r.z_mean;
  j["z_mean_se"] = r.z_mean_se;
  j["var_w1"] = r.var_w1;
  j["var_w1_se"] = r.var_w1_se;
  j["var_pass"] = r.var_pass;
  j["ks"] = {{"statistic", r.ks.statistic}, {"p_value", r.ks.p_value}, {"critical", r.ks_critical}, {"pass", r.ks_pass}};
  j["covariance"] = {{"empirical", to_json(r.cov)},
                     {"target", to_json(r.cov_target)},
                     {"max_deviation", r.cov_max_deviation},
                     {"tolerance", r.cov_tolerance},
                     {"pass", r.cov_pass}};
  j["pass"] = r.passed();
  return j;
}

inline Json to_json(const DecayReport& r) {
  Json j;
  j["i"] = r.i;
  j["j"] = r.j;
  j["window"] = r.window;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  j["burn_in"] = r.burn_in;
  j["bound"] = to_json(r.bound);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"lag", row.lag},
                    {"empirical", row.empirical},
                    {"se", row.se},
                    {"model", row.model},
                    {"bound", row.bound},
                    {"within_bound", row.within_bound()}});
  }
  j["rows"] = rows;
  return j;
}

}  // namespace hawkesmix
