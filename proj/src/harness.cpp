#include "qhl/harness.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json_fields.hpp"
#include "qhl/diagnostics.hpp"
#include "qhl/errors.hpp"
#include "qhl/kernels.hpp"
#include "qhl/parallel.hpp"
#include "qhl/qhawkes.hpp"
#include "qhl/scaling.hpp"
#include "qhl/volterra.hpp"

#ifndef QHL_VERSION
#define QHL_VERSION "0.0.0"
#endif

namespace qhl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest representation that reads back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string indexed(const std::string& stem, std::size_t r, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", r);
  return stem + buf + ext;
}

int get_int(const json& j, const char* key, const std::string& where, int fallback, int lo) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError("schema", where + ": '" + key + "' must be an integer");
  const long long v = j.at(key).get<long long>();
  if (v < lo || v > 100'000'000) throw ConfigError(key, where + ": '" + std::string(key) + "' out of range");
  return static_cast<int>(v);
}

bool get_bool(const json& j, const char* key, const std::string& where, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError("schema", where + ": '" + key + "' must be boolean");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& where, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError("schema", where + ": '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

const json& require_block(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("schema", where + ": missing '" + key + "'");
  return j.at(key);
}

// Nested specs carry their own seed field; the master seed always wins.
LimitModelSpec limit_spec(const json& j, std::uint64_t seed) {
  LimitModelSpec s = limit_spec_from_json(j);
  s.seed = seed;
  return s;
}

struct Output {
  std::vector<Artifact> files;
  json summary = json::object();
};

// ---------------------------------------------------------------------------

Output run_simulate_hawkes(const json& cfg, std::uint64_t seed, int threads) {
  const std::string where = "simulate-hawkes";
  detail::check_fields(cfg, {"experiment", "master_seed", "threads", "params", "n_reps", "residuals", "rescale_grid"},
                       where);
  const QHawkesParams params = qhawkes_params_from_json(require_block(cfg, "params", where));
  params.validate();
  const int reps = get_int(cfg, "n_reps", where, 1, 1);
  const bool residuals = get_bool(cfg, "residuals", where, false);
  const int grid = get_int(cfg, "rescale_grid", where, 0, 0);
  if (grid == 1) throw ConfigError("rescale_grid", where + ": rescale_grid must be 0 or >= 2");

  struct Rep {
    std::string events, rescaled;
    json info;
  };
  std::vector<Rep> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    const EventStream ev = simulate(params, seed, r);
    std::ostringstream os;
    write_events_csv(os, ev);
    out[r].events = os.str();
    json info = {{"replication", r}, {"n_events", ev.size()}, {"final_price", ev.price_at(params.horizon)}};
    if (residuals) {
      const KsTest ks = ks_test_exp1(time_change_residuals(params, ev));
      info["residual_ks"] = ks.statistic;
      info["residual_p_value"] = ks.p_value;
    }
    if (grid > 0) {
      std::ostringstream rs;
      write_rescaled_csv(rs, rescale_stable(ev, params, grid));
      out[r].rescaled = rs.str();
    }
    out[r].info = info;
  });

  Output o;
  json reps_json = json::array();
  for (std::size_t r = 0; r < out.size(); ++r) {
    o.files.push_back({indexed("events", r, ".csv"), std::move(out[r].events)});
    if (grid > 0) o.files.push_back({indexed("rescaled", r, ".csv"), std::move(out[r].rescaled)});
    reps_json.push_back(out[r].info);
  }
  o.summary = {{"stability", params.stability()}, {"replications", reps_json}};
  return o;
}

Output run_simulate_limit(const json& cfg, std::uint64_t seed, int threads) {
  const std::string where = "simulate-limit";
  detail::check_fields(cfg, {"experiment", "master_seed", "threads", "spec", "n_reps"}, where);
  const LimitModelSpec spec = limit_spec(require_block(cfg, "spec", where), seed);
  const int reps = get_int(cfg, "n_reps", where, 1, 1);

  std::vector<std::string> csv(static_cast<std::size_t>(reps));
  std::vector<json> info(csv.size());
  parallel_for(csv.size(), threads, [&](std::size_t r) {
    const MacroPath p = simulate_limit(spec, r);
    std::ostringstream os;
    write_macro_csv(os, p);
    csv[r] = os.str();
    info[r] = {{"replication", r}, {"clip_fraction", p.clip_fraction}, {"warnings", p.warnings},
               {"V_final", p.V[p.V.size() - 1]}};
  });
  Output o;
  for (std::size_t r = 0; r < csv.size(); ++r) o.files.push_back({indexed("path", r, ".csv"), std::move(csv[r])});
  o.summary = {{"model", spec.name()}, {"replications", info}};
  return o;
}

Output run_converge(const json& cfg, std::uint64_t seed, int threads) {
  const std::string where = "converge";
  detail::check_fields(cfg, {"experiment", "master_seed", "threads", "ladder"}, where);
  json lj = require_block(cfg, "ladder", where);
  if (lj.is_object()) lj["seed"] = seed;
  const LadderSpec spec = ladder_spec_from_json(lj);
  const LadderResult res = convergence_ladder(spec, threads);

  DiagnosticsReport report;
  report.convergence.push_back(res);
  report.metadata = {{"seed", seed}, {"ladder", to_json(spec)}};
  std::ostringstream os;
  write_ladder_csv(os, res);
  Output o;
  o.files.push_back({"ladder.csv", os.str()});
  o.files.push_back({"report.json", to_json(report).dump(2) + "\n"});
  return o;
}

// Simulated macro paths of a model, merged by replication index.
std::vector<MacroPath> macro_paths(const LimitModelSpec& spec, int reps, int threads) {
  std::vector<MacroPath> paths(static_cast<std::size_t>(reps));
  parallel_for(paths.size(), threads, [&](std::size_t r) { paths[r] = simulate_limit(spec, r); });
  return paths;
}

Output run_zumbach(const json& cfg, std::uint64_t seed, int threads) {
  const std::string where = "zumbach";
  detail::check_fields(cfg,
                       {"experiment", "master_seed", "threads", "spec", "n_reps", "tau", "sub_window", "burn_in",
                        "proxy", "n_boot", "level"},
                       where);
  const LimitModelSpec spec = limit_spec(require_block(cfg, "spec", where), seed);
  ZumbachOptions opt;
  opt.tau = get_int(cfg, "tau", where, opt.tau, 1);
  opt.sub_window = get_int(cfg, "sub_window", where, opt.sub_window, 1);
  opt.burn_in = detail::get_number(cfg, "burn_in", where, opt.burn_in);
  opt.n_boot = get_int(cfg, "n_boot", where, opt.n_boot, 1);
  opt.level = detail::get_number(cfg, "level", where, opt.level);
  const std::string proxy = get_string(cfg, "proxy", where, "realized");
  if (proxy == "realized") {
    opt.proxy = VolProxy::Realized;
  } else if (proxy == "true_v") {
    opt.proxy = VolProxy::TrueV;
  } else {
    throw ConfigError("schema", where + ": proxy must be 'realized' or 'true_v'");
  }
  opt.seed = seed;
  const int reps = get_int(cfg, "n_reps", where, 100, 1);

  const auto paths = macro_paths(spec, reps, threads);
  std::vector<Eigen::VectorXd> P, V;
  for (const auto& p : paths) {
    P.push_back(p.P);
    V.push_back(p.V);
  }
  DiagnosticsReport report;
  report.zumbach.push_back(weak_zumbach_pooled(P, V, spec.horizon / spec.n_steps, opt));
  report.metadata = {{"seed", seed}, {"model", to_json(spec)}, {"n_reps", reps}, {"proxy", proxy}};
  Output o;
  o.files.push_back({"report.json", to_json(report).dump(2) + "\n"});
  return o;
}

Output run_holder(const json& cfg, std::uint64_t seed, int threads) {
  const std::string where = "holder";
  detail::check_fields(cfg, {"experiment", "master_seed", "threads", "spec", "n_reps", "series", "q", "min_lag", "max_lag"},
                       where);
  const LimitModelSpec spec = limit_spec(require_block(cfg, "spec", where), seed);
  HolderOptions opt;
  if (cfg.contains("q")) opt.q = detail::get_numbers(cfg, "q", where);
  opt.min_lag = get_int(cfg, "min_lag", where, opt.min_lag, 1);
  opt.max_lag = get_int(cfg, "max_lag", where, opt.max_lag, 0);
  const std::string series = get_string(cfg, "series", where, "V");
  if (series != "V" && series != "Z" && series != "P") {
    throw ConfigError("schema", where + ": series must be V, Z or P");
  }
  const int reps = get_int(cfg, "n_reps", where, 20, 1);

  const auto paths = macro_paths(spec, reps, threads);
  std::vector<Eigen::VectorXd> xs;
  for (const auto& p : paths) xs.push_back(series == "V" ? p.V : series == "Z" ? p.Z : p.P);
  DiagnosticsReport report;
  report.holder.push_back(holder_estimate_pooled(xs, opt));
  report.metadata = {{"seed", seed}, {"model", to_json(spec)}, {"n_reps", reps}, {"series", series}};
  Output o;
  o.files.push_back({"report.json", to_json(report).dump(2) + "\n"});
  return o;
}

Output run_ml_table(const json& cfg) {
  const std::string where = "ml-table";
  detail::check_fields(cfg, {"experiment", "master_seed", "threads", "alpha", "lambda", "t"}, where);
  const auto a = detail::get_numbers(cfg, "alpha", where);
  const auto l = detail::get_numbers(cfg, "lambda", where);
  const auto t = detail::get_numbers(cfg, "t", where);
  if (a.empty() || l.empty() || t.empty()) throw ConfigError("grid_empty", where + ": parameter grids must be non-empty");
  Output o;
  o.files.push_back({"ml_table.csv", ml_table_csv(a, l, t)});
  return o;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"simulate-hawkes", "simulate-limit", "converge",
                                                 "zumbach",         "holder",         "ml-table"};
  return kinds;
}

const char* version_string() { return "qhl " QHL_VERSION; }

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ml_table_csv(const std::vector<double>& alphas, const std::vector<double>& lambdas,
                         const std::vector<double>& ts) {
  std::ostringstream os;
  os << "alpha,lambda,t,f,F\n";
  for (double a : alphas) {
    for (double l : lambdas) {
      for (double t : ts) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("ml-table: t must be finite and >= 0");
        const double f = ml_density(a, l, t);
        const double F = integrated_ml(a, l, t);
        os << fmt(a) << ',' << fmt(l) << ',' << fmt(t) << ',' << (std::isinf(f) ? std::string("inf") : fmt(f)) << ','
           << fmt(F) << '\n';
      }
    }
  }
  return os.str();
}

RunResult run_experiment(const std::string& kind, const json& config, std::uint64_t master_seed, int threads) {
  if (!config.is_object()) throw ConfigError("schema", "config must be a JSON object");
  if (config.contains("experiment")) {
    if (!config.at("experiment").is_string() || config.at("experiment").get<std::string>() != kind) {
      throw ConfigError("experiment_kind", "config 'experiment' does not match the subcommand '" + kind + "'");
    }
  }
  if (config.contains("master_seed") && !config.at("master_seed").is_number_unsigned()) {
    throw ConfigError("schema", "master_seed must be a non-negative integer");
  }
  if (config.contains("threads") && !config.at("threads").is_number_unsigned()) {
    throw ConfigError("schema", "threads must be a non-negative integer");
  }

  Output out;
  if (kind == "simulate-hawkes") {
    out = run_simulate_hawkes(config, master_seed, threads);
  } else if (kind == "simulate-limit") {
    out = run_simulate_limit(config, master_seed, threads);
  } else if (kind == "converge") {
    out = run_converge(config, master_seed, threads);
  } else if (kind == "zumbach") {
    out = run_zumbach(config, master_seed, threads);
  } else if (kind == "holder") {
    out = run_holder(config, master_seed, threads);
  } else if (kind == "ml-table") {
    out = run_ml_table(config);
  } else {
    throw ConfigError("experiment_kind", "unknown experiment '" + kind + "'");
  }

  // The recorded config re-runs the experiment on its own; the thread count
  // never affects outputs and is left out.
  json recorded = config;
  recorded.erase("threads");
  recorded["experiment"] = kind;
  recorded["master_seed"] = master_seed;

  RunResult res;
  if (!out.summary.empty()) out.files.push_back({"summary.json", out.summary.dump(2) + "\n"});
  json files = json::array();
  for (const auto& f : out.files) {
    files.push_back({{"name", f.name}, {"bytes", f.content.size()}, {"fnv1a64", hex64(fnv1a64(f.content))}});
  }
  res.manifest = {{"experiment", kind},
                  {"version", version_string()},
                  {"master_seed", master_seed},
                  {"config_hash", hex64(fnv1a64(recorded.dump()))},
                  {"config", recorded},
                  {"artifacts", files}};
  res.artifacts = std::move(out.files);
  res.artifacts.push_back({"manifest.json", res.manifest.dump(2) + "\n"});
  return res;
}

void write_artifacts(const std::string& dir, const RunResult& result) {
  std::vector<fs::path> written;
  bool created_dir = false;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created_dir) fs::remove(dir, ec);
  };
  try {
    std::error_code ec;
    if (!fs::exists(dir, ec)) {
      if (!fs::create_directories(dir, ec) || ec) throw IoError("cannot create output directory '" + dir + "'");
      created_dir = true;
    } else if (!fs::is_directory(dir, ec)) {
      throw IoError("output path '" + dir + "' is not a directory");
    }
    for (const auto& a : result.artifacts) {
      const fs::path p = fs::path(dir) / a.name;
      std::ofstream os(p, std::ios::binary | std::ios::trunc);
      if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
      written.push_back(p);
      os.write(a.content.data(), static_cast<std::streamsize>(a.content.size()));
      os.close();
      if (!os) throw IoError("write failed for '" + p.string() + "'");
    }
  } catch (...) {
    cleanup();
    throw;
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 2;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return 2;
  return 3;
}

json error_json(const std::exception& e) {
  const int code = exit_code_for(e);
  json j = {{"error", code == 2 ? "validation" : code == 4 ? "io" : "numerical"},
            {"exit_code", code},
            {"message", e.what()}};
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) j["invariant"] = c->invariant();
  if (const auto* d = dynamic_cast<const DivergenceError*>(&e)) j["norm"] = d->norm();
  if (const auto* a = dynamic_cast<const AccuracyLossError*>(&e)) j["achieved_bound"] = a->achieved_bound();
  return j;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Quadratic Hawkes simulation and scaling-limit experiments"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  int threads = -1;
  for (const auto& kind : experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "master seed (overrides master_seed in the config)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads, 0 = all cores (falls back to QHL_THREADS)")
        ->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string kind = app.get_subcommands().front()->get_name();
  const bool seed_given = app.get_subcommands().front()->count("--seed") > 0;

  try {
    std::ifstream is(config_path);
    if (!is) throw IoError("cannot read config '" + config_path + "'");
    json config;
    try {
      config = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError("schema", std::string("config is not valid JSON: ") + e.what());
    }
    if (!seed_given && config.is_object() && config.contains("master_seed") &&
        config.at("master_seed").is_number_unsigned()) {
      seed = config.at("master_seed").get<std::uint64_t>();
    }
    if (threads < 0) {
      if (const char* env = std::getenv("QHL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 0) throw ConfigError("threads", "QHL_THREADS must be a non-negative integer");
        threads = static_cast<int>(v);
      } else if (config.is_object() && config.contains("threads") && config.at("threads").is_number_unsigned()) {
        threads = config.at("threads").get<int>();
      } else {
        threads = 0;
      }
    }
    const RunResult res = run_experiment(kind, config, seed, threads);
    write_artifacts(out_dir, res);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << error_json(e).dump() << std::endl;
    return exit_code_for(e);
  }
}

}  // namespace qhl
