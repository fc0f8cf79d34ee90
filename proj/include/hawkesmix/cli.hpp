#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hawkesmix/io.hpp"

namespace hawkesmix::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kError = 1, kRefused = 2, kCheckFailed = 3 };

struct Options {
  std::string subcommand;
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

/// Parsed configuration with the model inlined and any --seed override
/// applied; the hash covers exactly this document.
struct Experiment {
  Json config;
  std::string hash;
  HawkesModel model;
};

inline const char* block_of(const std::string& sub) {
  if (sub == "simulate") return "simulate";
  if (sub == "spectrum" || sub == "variance") return "spectrum";
  if (sub == "mixing-bound") return "mixing";
  if (sub == "clt-test") return "clt";
  if (sub == "decay") return "decay";
  return nullptr;
}

inline Json read_json_file(const fs::path& path, const std::string& ptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ptr, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(ptr, path.string() + ": " + e.what());
  }
}

inline std::string config_hash(const Json& config) {
  // sorted keys, so the hash ignores key order in the file
  return hex64(fnv1a64(nlohmann::json::parse(config.dump()).dump()));
}

inline Experiment load(const Options& opt) {
  Json config = read_json_file(opt.config, "");
  io::check_keys(config, "", {"model", "simulate", "spectrum", "mixing", "clt", "decay"});
  const Json& mj = io::member(config, "", "model");
  if (mj.is_string()) {
    const fs::path p = fs::path(opt.config).parent_path() / mj.get<std::string>();
    config["model"] = read_json_file(p, "/model");
  } else if (!mj.is_object()) {
    throw ConfigError("/model", "expected a model object or a path to a model file");
  }
  HawkesModel model = model_from_json(config["model"], "/model");
  if (opt.seed) {
    const char* block = block_of(opt.subcommand);
    if (block && config.contains(block) && config[block].is_object()) config[block]["seed"] = *opt.seed;
  }
  return {config, config_hash(config), std::move(model)};
}

inline const Json& block(const Experiment& ex, const char* name) {
  const std::string ptr = std::string("/") + name;
  if (!ex.config.contains(name)) throw ConfigError(ptr, "missing required block for this subcommand");
  io::require_object(ex.config[name], ptr);
  return ex.config[name];
}

inline Simulator simulator_of(const Json& b, const std::string& ptr) {
  if (!b.contains("simulator")) return Simulator::Cluster;
  const std::string p = io::child(ptr, "simulator");
  const std::string name = io::as_string(b["simulator"], p);
  return io::at(p, [&] { return simulator_from_string(name); });
}

inline std::vector<double> xi_grid(const Json& b, const std::string& ptr) {
  const std::string p = io::child(ptr, "xi");
  const Json& x = io::member(b, ptr, "xi");
  if (x.is_array()) return io::as_numbers(x, p);
  io::check_keys(x, p, {"min", "max", "count"});
  const double lo = io::number(x, p, "min"), hi = io::number(x, p, "max");
  const auto n = io::uint(x, p, "count");
  if (n < 2 || !(hi > lo)) throw ConfigError(p, "need count >= 2 and max > min");
  std::vector<double> out;
  for (std::uint64_t k = 0; k < n; ++k) out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
  return out;
}

inline std::optional<double> common_period(const TestFunction& f) {
  std::optional<double> tau;
  for (const auto& c : f.components()) {
    if (std::holds_alternative<Constant>(c)) continue;
    const auto p = period_of(c);
    if (!p) return std::nullopt;
    if (tau && std::abs(*tau - *p) > 1e-12 * *tau) return std::nullopt;
    tau = p;
  }
  return tau;
}

// ------------------------------------------------------------ subcommands

struct Context {
  const Options& opt;
  const Experiment& ex;
  fs::path out;
  std::ostream& log;
  std::vector<std::string> artifacts;
  std::optional<std::uint64_t> seed;

  void json(const std::string& name, Json j) {
    Json doc;
    doc["config_hash"] = ex.hash;
    for (auto& [k, v] : j.items()) doc[k] = v;
    write_json(out / name, doc);
    artifacts.push_back(name);
  }
  void text(const std::string& name, const std::string& body) {
    write_text(out / name, body);
    artifacts.push_back(name);
  }
};

inline int cmd_validate(Context& cx) {
  std::optional<double> beta;
  if (cx.ex.config.contains("mixing") && cx.ex.config["mixing"].is_object()) {
    beta = io::optional_number(cx.ex.config["mixing"], "/mixing", "beta");
  }
  const auto s = validate(cx.ex.model, beta);
  cx.log << "rho = " << fmt17(s.rho) << "\nm =";
  for (Eigen::Index i = 0; i < s.mean_intensity.size(); ++i) cx.log << " " << fmt17(s.mean_intensity(i));
  cx.log << "\n";
  cx.json("summary.json", to_json(s));
  return kOk;
}

inline int cmd_simulate(Context& cx) {
  const Json& b = block(cx.ex, "simulate");
  io::check_keys(b, "/simulate", {"T", "burn_in", "seed", "simulator"});
  const double horizon = io::number(b, "/simulate", "T");
  const auto seed = io::uint(b, "/simulate", "seed");
  const Simulator which = simulator_of(b, "/simulate");
  const double burn_in = b.contains("burn_in") ? io::number(b, "/simulate", "burn_in") : default_burn_in(cx.ex.model);
  const EventLog log = io::at("/simulate", [&] { return simulate(cx.ex.model, which, horizon, burn_in, seed); });
  cx.seed = seed;
  cx.text("events.csv", events_csv(log, cx.ex.hash));
  Json counts = Json::array(), rates = Json::array();
  for (const auto& ev : log.events) {
    counts.push_back(ev.size());
    rates.push_back(static_cast<double>(ev.size()) / horizon);
  }
  cx.json("events.json", {{"seed", seed},
                          {"simulator", std::string(to_string(which))},
                          {"T", horizon},
                          {"burn_in", burn_in},
                          {"counts", counts},
                          {"empirical_rates", rates},
                          {"mean_intensity", to_json(mean_intensity(cx.ex.model))}});
  cx.log << "simulated " << log.total_events() << " events on [0, " << fmt17(horizon) << "]\n";
  return kOk;
}

inline int cmd_spectrum(Context& cx) {
  const Json& b = block(cx.ex, "spectrum");
  io::check_keys(b, "/spectrum", {"xi", "f", "T", "harmonics"});
  const auto grid = xi_grid(b, "/spectrum");
  const auto d = static_cast<Eigen::Index>(cx.ex.model.dim());
  CsvWriter csv(cx.ex.hash, {"xi", "i", "j", "re", "im"});
  double defect = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (double xi : grid) {
    const auto s = bartlett_density(cx.ex.model, xi);
    defect = std::max(defect, s.hermitian_defect());
    min_eig = std::min(min_eig, s.min_eigenvalue());
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        csv.row(xi, static_cast<std::size_t>(i), static_cast<std::size_t>(j), s.value(i, j).real(), s.value(i, j).imag());
  }
  cx.text("spectrum.csv", csv.str());
  cx.json("spectrum.json", {{"points", grid.size()}, {"max_hermitian_defect", defect}, {"min_eigenvalue", min_eig}});
  cx.log << "spectrum on " << grid.size() << " frequencies, min eigenvalue " << fmt17(min_eig) << "\n";
  return kOk;
}

inline int cmd_variance(Context& cx) {
  const Json& b = block(cx.ex, "spectrum");
  io::check_keys(b, "/spectrum", {"xi", "f", "T", "harmonics"});
  const auto f = test_function_from_json(io::member(b, "/spectrum", "f"), "/spectrum/f", cx.ex.model.dim());
  const double horizon = io::number(b, "/spectrum", "T");
  const auto rep = io::at("/spectrum", [&] { return variance_ST_report(cx.ex.model, f, horizon); });
  Json j;
  j["T"] = horizon;
  j["sigma2_T"] = rep.value;
  j["sigma2_T_over_T"] = rep.value / horizon;
  j["report"] = to_json(rep);
  bool all_constant = true;
  Vector k(static_cast<Eigen::Index>(f.dim()));
  for (std::size_t i = 0; i < f.dim(); ++i) {
    if (const auto* c = std::get_if<Constant>(&f[i])) k(static_cast<Eigen::Index>(i)) = c->k;
    else all_constant = false;
  }
  if (all_constant) {
    j["asymptotic"] = {{"kind", "constant"}, {"value", asymptotic_variance_const(cx.ex.model, k)}};
  } else if (const auto tau = common_period(f)) {
    const auto harmonics = b.contains("harmonics") ? io::uint(b, "/spectrum", "harmonics") : 64;
    const auto p = asymptotic_variance_periodic(cx.ex.model, f, *tau, harmonics);
    j["asymptotic"] = {{"kind", "periodic"}, {"period", *tau}, {"value", p.value},
                       {"tail_bound", p.tail_bound}, {"harmonics", p.harmonics}};
  }
  cx.json("variance.json", j);
  cx.log << "sigma_T^2 = " << fmt17(rep.value) << " (T = " << fmt17(horizon) << ")\n";
  return kOk;
}

inline int cmd_mixing(Context& cx) {
  const Json& b = block(cx.ex, "mixing");
  io::check_keys(b, "/mixing", {"beta", "gamma", "lags"});
  const double beta = io::number(b, "/mixing", "beta");
  const double gamma = io::number(b, "/mixing", "gamma");
  const auto lags = io::as_numbers(io::member(b, "/mixing", "lags"), "/mixing/lags");
  const auto rep = io::at("/mixing", [&] { return mixing_bound(cx.ex.model, beta, gamma, lags); });
  cx.json("mixing_bound.json", to_json(rep));
  cx.log << "constant " << fmt17(rep.constant) << "  p " << fmt17(rep.p) << "  q " << fmt17(rep.q) << "  r "
         << fmt17(rep.r) << "  nu " << fmt17(rep.nu) << "\n";
  cx.log << "tau bound\n";
  for (const auto& row : rep.rows) cx.log << fmt17(row.lag) << " " << fmt17(row.bound) << "\n";
  return kOk;
}

inline int cmd_clt(Context& cx) {
  const Json& b = block(cx.ex, "clt");
  const std::string ptr = "/clt";
  io::check_keys(b, ptr, {"f", "T", "R", "seed", "beta", "delta", "grid", "simulator", "burn_in", "grid_step"});
  const auto f = test_function_from_json(io::member(b, ptr, "f"), "/clt/f", cx.ex.model.dim());
  HarnessOptions h;
  h.beta = io::number(b, ptr, "beta");
  h.delta = io::number(b, ptr, "delta");
  if (b.contains("grid")) h.grid = io::as_numbers(b["grid"], "/clt/grid");
  h.simulator = simulator_of(b, ptr);
  h.burn_in = io::optional_number(b, ptr, "burn_in");
  h.grid_step = io::number_or(b, ptr, "grid_step", 0.0);
  h.threads = cx.opt.threads;
  const double horizon = io::number(b, ptr, "T");
  const auto replicates = io::uint(b, ptr, "R");
  const auto seed = io::uint(b, ptr, "seed");
  cx.seed = seed;
  const auto rep = io::at(ptr, [&] { return clt_harness(cx.ex.model, f, horizon, replicates, seed, h); });
  cx.json("clt_report.json", to_json(rep));
  std::vector<std::string> header = {"replicate", "z"};
  for (double u : h.grid) {
    char name[32];
    std::snprintf(name, sizeof name, "w_%g", u);
    header.emplace_back(name);
  }
  CsvWriter csv(cx.ex.hash, header);
  for (std::size_t r = 0; r < rep.replicates; ++r) {
    std::string line = std::to_string(r) + "," + fmt17(rep.z[r]);
    for (double w : rep.paths[r]) line += "," + fmt17(w);
    csv.row(line);
  }
  cx.text("clt_replicates.csv", csv.str());
  cx.log << "KS D = " << fmt17(rep.ks.statistic) << " (critical " << fmt17(rep.ks_critical) << ", p "
         << fmt17(rep.ks.p_value) << ")  max |Cov - min(u,v)| = " << fmt17(rep.cov_max_deviation) << " (tol "
         << fmt17(rep.cov_tolerance) << ")  " << (rep.passed() ? "PASS" : "FAIL") << "\n";
  return rep.passed() ? kOk : kCheckFailed;
}

inline int cmd_decay(Context& cx) {
  const Json& b = block(cx.ex, "decay");
  const std::string ptr = "/decay";
  io::check_keys(b, ptr, {"i", "j", "window", "lags", "R", "seed", "beta", "gamma", "simulator", "burn_in"});
  DecayOptions d;
  d.beta = io::number(b, ptr, "beta");
  d.gamma = io::number(b, ptr, "gamma");
  d.simulator = simulator_of(b, ptr);
  d.burn_in = io::optional_number(b, ptr, "burn_in");
  d.threads = cx.opt.threads;
  const auto i = io::uint(b, ptr, "i"), j = io::uint(b, ptr, "j");
  const double window = io::number(b, ptr, "window");
  const auto lags = io::as_numbers(io::member(b, ptr, "lags"), "/decay/lags");
  const auto replicates = io::uint(b, ptr, "R");
  const auto seed = io::uint(b, ptr, "seed");
  cx.seed = seed;
  const auto rep =
      io::at(ptr, [&] { return mixing_decay_diagnostic(cx.ex.model, i, j, window, lags, replicates, seed, d); });
  cx.json("decay.json", to_json(rep));
  CsvWriter csv(cx.ex.hash, {"lag", "empirical", "se", "model", "bound"});
  for (const auto& row : rep.rows) csv.row(row.lag, row.empirical, row.se, row.model, row.bound);
  cx.text("decay.csv", csv.str());
  cx.log << "lag empirical se model bound\n";
  for (const auto& row : rep.rows) {
    cx.log << fmt17(row.lag) << " " << fmt17(row.empirical) << " " << fmt17(row.se) << " " << fmt17(row.model) << " "
           << fmt17(row.bound) << "\n";
  }
  return kOk;
}

inline fs::path output_dir(const Options& opt) {
  if (opt.out) return *opt.out;
  if (const char* env = std::getenv("HAWKESMIX_OUT"); env && *env) return env;
  return "hawkesmix-out";
}

inline Json manifest(const Context& cx) {
  Json j;
  j["tool"] = "hawkesmix";
  j["subcommand"] = cx.opt.subcommand;
  j["config_hash"] = cx.ex.hash;
  j["seed"] = cx.seed ? Json(*cx.seed) : Json(nullptr);
  j["versions"] = {{"hawkesmix", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"cli11", CLI11_VERSION}};
  j["artifacts"] = cx.artifacts;
  j["config"] = cx.ex.config;
  return j;
}

/// Runs one subcommand; returns the process exit code.
inline int execute(const Options& opt, std::ostream& log, std::ostream& err) {
  try {
    const Experiment ex = load(opt);
    const fs::path out = output_dir(opt);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
      err << "error: cannot create output directory " << out.string() << "\n";
      return kError;
    }
    Context cx{opt, ex, out, log, {}, std::nullopt};
    int code = kOk;
    const auto& s = opt.subcommand;
    if (s == "validate") code = cmd_validate(cx);
    else if (s == "simulate") code = cmd_simulate(cx);
    else if (s == "spectrum") code = cmd_spectrum(cx);
    else if (s == "variance") code = cmd_variance(cx);
    else if (s == "mixing-bound") code = cmd_mixing(cx);
    else if (s == "clt-test") code = cmd_clt(cx);
    else if (s == "decay") code = cmd_decay(cx);
    else throw ConfigError("", "unknown subcommand " + s);
    cx.text("config.json", ex.config.dump(2) + "\n");
    write_json(out / "manifest.json", manifest(cx));
    return code;
  } catch (const HypothesisError& e) {
    err << "refused: hypothesis not satisfied: " << e.what() << "\n";
    return kRefused;
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
}

inline int main(int argc, char** argv) {
  CLI::App app{"Stationary multivariate Hawkes processes: simulation, spectra, mixing bounds, CLT checks"};
  app.set_version_flag("--version", kVersion);
  app.fallthrough();  // inherited by subcommands: global flags may follow the subcommand
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory (default $HAWKESMIX_OUT or ./hawkesmix-out)");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the seed of the selected block");
  app.add_option("--threads", opt.threads, "worker cap (0 = all cores)");
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"validate", "check subcriticality and print rho and m"},
      {"simulate", "simulate an event log"},
      {"spectrum", "Bartlett spectral density on a frequency grid"},
      {"variance", "variance of the centred linear statistic"},
      {"mixing-bound", "numeric covariance-decay bound"},
      {"clt-test", "Monte Carlo CLT / FCLT harness"},
      {"decay", "empirical covariance decay against model and bound"}};
  for (const auto& [name, help] : subs) app.add_subcommand(name, help);
  app.require_subcommand(1, 1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }
  opt.subcommand = app.get_subcommands().front()->get_name();
  if (seed_opt->count() > 0) opt.seed = seed;
  return execute(opt, std::cout, std::cerr);
}

}  // namespace hawkesmix::cli
