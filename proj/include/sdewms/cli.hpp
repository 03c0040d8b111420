#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "models.hpp"
#include "schemes.hpp"

namespace sdewms::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kUsage = "usage: sdewms <run|path|chain-stats> [options]  (--help for details)";

namespace detail {

/// Model-family flags shared by `run` and `path`; empty strings mean "not given".
struct ModelFlags {
  std::string model, q, x0, i0, horizon, lambda, mu, sigma, nu;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "built-in model: ex1, mean-reverting, gbm");
    cmd->add_option("--q", q, "generator rows, e.g. --q=-0.5,0.5;0.5,-0.5");
    cmd->add_option("--x0", x0, "initial value");
    cmd->add_option("--i0", i0, "initial regime (0-based)");
    cmd->add_option("--horizon", horizon, "time horizon T");
    cmd->add_option("--lambda", lambda, "mean-reverting speeds per regime");
    cmd->add_option("--mu", mu, "mean-reverting levels / gbm drifts per regime");
    cmd->add_option("--sigma", sigma, "mean-reverting volatilities per regime");
    cmd->add_option("--nu", nu, "gbm volatilities per regime");
  }

  void apply(Settings& s) const {
    auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) s[key] = v;
    };
    put("model", model);
    put("q", q);
    put("x0", x0);
    put("i0", i0);
    put("T", horizon);
    put("lambda", lambda);
    put("mu", mu);
    put("sigma", sigma);
    put("nu", nu);
  }
};

inline std::uint64_t seed_or_env(const std::string& flag, std::uint64_t fallback) {
  if (!flag.empty()) return parse_int<std::uint64_t>(flag, "--seed");
  if (const char* env = std::getenv("SDEWMS_SEED"); env != nullptr && *env != '\0') {
    return parse_int<std::uint64_t>(env, "SDEWMS_SEED");
  }
  return fallback;
}

struct RunFlags {
  ModelFlags model;
  std::string config, schemes, levels, ref_level, paths, seed, out, threads;
  bool max_error = false;
};

inline int do_run(const RunFlags& f, std::ostream& out, std::ostream& log) {
  Settings s = f.config.empty() ? Settings{} : load_settings(f.config);
  f.model.apply(s);
  if (!f.schemes.empty()) s["schemes"] = f.schemes;
  if (!f.levels.empty()) {
    const auto [a, b] = parse_level_range(f.levels);
    s["L_min"] = std::to_string(a);
    s["L_max"] = std::to_string(b);
  }
  if (!f.ref_level.empty()) s["L_ref"] = f.ref_level;
  if (!f.paths.empty()) s["n_paths"] = f.paths;
  if (!f.out.empty()) s["output_path"] = f.out;
  if (!f.threads.empty()) s["threads"] = f.threads;
  if (f.max_error) s["max_error"] = "true";
  if (!f.seed.empty() || !s.contains("seed")) {
    s["seed"] = std::to_string(seed_or_env(f.seed, 42));
  }

  const ExperimentConfig cfg = experiment_from_settings(s);
  const ErrorTable table = run_experiment(cfg);
  if (cfg.output_path.empty() || cfg.output_path == "-") {
    write_csv(table, out);
  } else {
    write_csv(table, cfg.output_path);
    log << "wrote " << table.rows.size() << " rows to " << cfg.output_path << '\n';
  }
  return kExitOk;
}

struct PathFlags {
  ModelFlags model;
  std::string config, schemes, level, seed, path_index, out;
};

/// One coupled path, every requested scheme at one level:
/// t, <scheme columns...>, regime.
inline int do_path(const PathFlags& f, std::ostream& out) {
  Settings s = f.config.empty() ? Settings{} : load_settings(f.config);
  f.model.apply(s);
  const Model model = model_from_settings(s);
  validate_model(model);
  const std::vector<SchemeKind> schemes = parse_scheme_list(
      !f.schemes.empty() ? f.schemes
                         : (s.contains("schemes") ? s.at("schemes")
                                                  : "rand-milstein,milstein,euler,modified,reduced"));
  const int level = f.level.empty() ? 6 : parse_int<int>(f.level, "--level");
  if (level < 1 || level > 20) throw ConfigError("--level must be in 1..20");
  const std::uint64_t seed =
      seed_or_env(f.seed, s.contains("seed") ? parse_int<std::uint64_t>(s.at("seed"), "seed") : 42);
  const std::uint64_t index = f.path_index.empty() ? 0 : parse_int<std::uint64_t>(f.path_index, "--path-index");

  const CoupledPath path = make_coupled_path(model, level, level, seed, index);
  const LevelGrid grid(level, model.horizon);
  std::vector<Trajectory> trajectories;
  for (auto k : schemes) trajectories.push_back(integrate(k, model, grid, path.chain, path.noise, path.uniforms));

  std::unique_ptr<std::ofstream> file;
  std::ostream* os = &out;
  if (!f.out.empty() && f.out != "-") {
    file = std::make_unique<std::ofstream>(f.out);
    if (!*file) throw IoError("cannot open '" + f.out + "' for writing");
    os = file.get();
  }
  *os << 't';
  for (auto k : schemes) {
    if (model.dim_x == 1) {
      *os << ',' << to_string(k);
    } else {
      for (std::size_t a = 0; a < model.dim_x; ++a) *os << ',' << to_string(k) << '[' << a << ']';
    }
  }
  *os << ",regime\n";
  for (std::size_t j = 0; j <= grid.n_steps(); ++j) {
    *os << format_decimal(grid.point(j));
    for (const auto& tr : trajectories) {
      for (double v : tr.at(j)) *os << ',' << format_decimal(v);
    }
    *os << ',' << path.chain.state_at(grid.point(j)) << '\n';
  }
  if (!*os) throw IoError("write failed");
  return kExitOk;
}

struct ChainStatsFlags {
  std::string q, i0, horizon, samples, seed;
};

inline int do_chain_stats(const ChainStatsFlags& f, std::ostream& out) {
  const GeneratorMatrix q = f.q.empty() ? symmetric_two_state_generator() : parse_generator(f.q);
  const State i0 = f.i0.empty() ? 0 : parse_int<State>(f.i0, "--i0");
  if (i0 >= q.n_states()) throw ConfigError("--i0 must be a valid state index");
  const double horizon = f.horizon.empty() ? 1.0 : parse_double(f.horizon, "--horizon");
  if (!(horizon > 0.0)) throw ConfigError("--horizon must be positive");
  const std::size_t samples = f.samples.empty() ? 100000 : parse_int<std::size_t>(f.samples, "--samples");
  if (samples < 2) throw ConfigError("--samples must be >= 2");
  const std::uint64_t seed = seed_or_env(f.seed, 42);

  const auto stats = chain_switch_stats(q, i0, horizon, samples, seed, {0.25, 0.5, 1.0, horizon});
  out << "window,k,empirical,stderr,bound\n";
  for (const auto& st : stats) {
    out << format_decimal(st.window) << ',' << st.k << ',' << format_decimal(st.empirical) << ','
        << format_decimal(st.std_error) << ',' << format_decimal(st.bound) << '\n';
  }
  return kExitOk;
}

}  // namespace detail

/// Entry point. Every failure prints exactly one `error: ...` line to `err`.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Regime-switching SDE simulator and strong-error benchmark", "sdewms"};
  app.require_subcommand(1, 1);

  detail::RunFlags run_flags;
  auto* run = app.add_subcommand("run", "coupled strong-error experiment, CSV output");
  run_flags.model.add_to(run);
  run->add_option("--config", run_flags.config, "flat key = value config file");
  run->add_option("--schemes", run_flags.schemes, "comma-separated scheme names");
  run->add_option("--levels", run_flags.levels, "inclusive level range A..B (h = T 2^-L)");
  run->add_option("--ref-level", run_flags.ref_level, "reference level, greater than B");
  run->add_option("--paths", run_flags.paths, "Monte Carlo paths");
  run->add_option("--seed", run_flags.seed, "64-bit seed (fallback: SDEWMS_SEED)");
  run->add_option("--out", run_flags.out, "CSV output path (default: stdout)");
  run->add_option("--threads", run_flags.threads, "worker threads (default 1 for stable timings)");
  run->add_flag("--max-error", run_flags.max_error, "max-over-grid error instead of terminal error");

  detail::PathFlags path_flags;
  auto* path = app.add_subcommand("path", "dump one coupled path for several schemes at one level");
  path_flags.model.add_to(path);
  path->add_option("--config", path_flags.config, "flat key = value config file");
  path->add_option("--schemes", path_flags.schemes, "comma-separated scheme names");
  path->add_option("--level", path_flags.level, "grid level L (default 6)");
  path->add_option("--seed", path_flags.seed, "64-bit seed (fallback: SDEWMS_SEED)");
  path->add_option("--path-index", path_flags.path_index, "sub-stream index (default 0)");
  path->add_option("--out", path_flags.out, "CSV output path (default: stdout)");

  detail::ChainStatsFlags chain_flags;
  auto* chain = app.add_subcommand("chain-stats", "empirical switch-count tail probabilities vs (qw)^k");
  chain->add_option("--q", chain_flags.q, "generator rows, e.g. --q=-0.5,0.5;0.5,-0.5");
  chain->add_option("--i0", chain_flags.i0, "initial state (default 0)");
  chain->add_option("--horizon", chain_flags.horizon, "time horizon T (default 1)");
  chain->add_option("--samples", chain_flags.samples, "number of chain paths (default 100000)");
  chain->add_option("--seed", chain_flags.seed, "64-bit seed (fallback: SDEWMS_SEED)");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << kUsage << '\n';
    return kExitConfig;
  }

  try {
    if (run->parsed()) return detail::do_run(run_flags, out, err);
    if (path->parsed()) return detail::do_path(path_flags, out);
    return detail::do_chain_stats(chain_flags, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args), out, err);
}

}  // namespace sdewms::cli
