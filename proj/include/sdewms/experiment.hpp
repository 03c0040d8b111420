#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "models.hpp"
#include "noise.hpp"
#include "random.hpp"
#include "schemes.hpp"

namespace sdewms {

enum class ErrorMetric {
  Terminal,       // ‖X_T − X^h_T‖_{L2}
  MaxOverGrid,    // ‖max_j |X_{t_j} − X^h_j|‖_{L2} over the coarse grid points
};

struct ExperimentConfig {
  Model model = make_ex1();
  std::vector<SchemeKind> schemes{SchemeKind::RandMilstein};
  int L_min = 1;
  int L_max = 5;
  int L_ref = 8;
  std::size_t n_paths = 100;
  std::uint64_t seed = 0;
  std::string output_path;
  std::size_t threads = 1;
  ErrorMetric metric = ErrorMetric::Terminal;
  /// Reference scheme at L_ref, treated as the true solution.
  SchemeKind reference = SchemeKind::RandMilstein;

  void validate() const {
    if (L_min < 1) throw ConfigError("L_min must be >= 1");
    if (L_max < L_min) throw ConfigError("L_max must be >= L_min");
    if (L_ref <= L_max) throw ConfigError("L_ref must be greater than L_max (reference level above every tested level)");
    if (L_ref > 24) throw ConfigError("L_ref must be <= 24");
    if (n_paths < 2) throw ConfigError("n_paths must be >= 2");
    if (schemes.empty()) throw ConfigError("at least one scheme is required");
    if (threads == 0) throw ConfigError("threads must be >= 1");
  }
};

/// One Monte Carlo path's shared randomness: every scheme at every level reads
/// from these same objects.
struct CoupledPath {
  ChainPath chain;
  UniformFamily uniforms;
  NoisePath noise;
};

/// Builds path `index` of the experiment from sub-stream (seed, index):
/// chain first, then finest uniforms and their coarsenings, then Brownian
/// values on the union of every time any scheme will ask for.
inline CoupledPath make_coupled_path(const Model& model, int min_level, int finest_level, std::uint64_t seed,
                                     std::uint64_t index) {
  Stream stream(seed, index);
  ChainPath chain = simulate_chain(model.generator, model.i0, model.horizon, stream);
  const LevelGrid finest(finest_level, model.horizon);
  UniformFamily uniforms(finest, min_level, stream);
  std::vector<LevelGrid> grids;
  for (int l = min_level; l <= finest_level; ++l) grids.emplace_back(l, model.horizon);
  auto times = build_time_set(grids, chain, uniforms);
  NoisePath noise = sample_brownian(std::move(times), model.dim_w, stream);
  return CoupledPath{std::move(chain), std::move(uniforms), std::move(noise)};
}

struct ErrorRow {
  SchemeKind scheme;
  int level;
  double h;
  std::size_t n_paths;
  double l2_error;
  double cpu_seconds;
  double std_error;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  std::vector<std::pair<SchemeKind, double>> fitted_orders;

  std::vector<ErrorRow> rows_for(SchemeKind k) const {
    std::vector<ErrorRow> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out), [k](const ErrorRow& r) { return r.scheme == k; });
    return out;
  }
  const ErrorRow& row(SchemeKind k, int level) const {
    for (const auto& r : rows) {
      if (r.scheme == k && r.level == level) return r;
    }
    throw ArgumentError("error table: no row for " + std::string(to_string(k)) + " at level " + std::to_string(level));
  }
  std::optional<double> order(SchemeKind k) const {
    for (const auto& [s, o] : fitted_orders) {
      if (s == k) return o;
    }
    return std::nullopt;
  }
};

/// Least-squares slope of log2(error) against log2(h).
inline double fit_order(const std::vector<ErrorRow>& rows) {
  if (rows.size() < 3) throw FitError("fit_order: need at least 3 levels, got " + std::to_string(rows.size()));
  double sx = 0.0, sy = 0.0;
  for (const auto& r : rows) {
    if (!(r.l2_error > 0.0) || !(r.h > 0.0)) throw FitError("fit_order: errors and step sizes must be positive");
    sx += std::log2(r.h);
    sy += std::log2(r.l2_error);
  }
  const double n = static_cast<double>(rows.size());
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : rows) {
    const double dx = std::log2(r.h) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log2(r.l2_error) - my);
  }
  if (sxx == 0.0) throw FitError("fit_order: all step sizes are equal");
  return sxy / sxx;
}

/// Observer called for each trajectory computed inside run_experiment; tests
/// use it to check that all schemes on one path share the same randomness.
using IntegrateObserver =
    std::function<void(std::size_t path, SchemeKind kind, int level, const ChainPath&, const NoisePath&)>;

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i, t);
      } catch (...) {
        errors[t] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Strong-error benchmark. Per path: one CoupledPath, the reference at L_ref,
/// then every (scheme, level) pair on the same randomness. Squared errors are
/// stored per path and reduced in path order, so the numbers do not depend on
/// the thread count. cpu_seconds covers the stepping loops only.
inline ErrorTable run_experiment(const ExperimentConfig& cfg, const IntegrateObserver& observer = {}) {
  cfg.validate();
  validate_model(cfg.model);
  const Model& model = cfg.model;

  std::vector<SchemeKind> schemes = cfg.schemes;
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());

  const std::size_t n_levels = static_cast<std::size_t>(cfg.L_max - cfg.L_min + 1);
  const std::size_t n_entries = schemes.size() * n_levels;
  const std::size_t n_threads = std::max<std::size_t>(1, cfg.threads);
  std::vector<double> sq(cfg.n_paths * n_entries);
  std::vector<std::vector<double>> seconds(n_threads, std::vector<double>(n_entries, 0.0));

  const LevelGrid ref_grid(cfg.L_ref, model.horizon);
  detail::parallel_for(cfg.n_paths, n_threads, [&](std::size_t p, std::size_t tid) {
    const CoupledPath path = make_coupled_path(model, cfg.L_min, cfg.L_ref, cfg.seed, p);
    if (observer) observer(p, cfg.reference, cfg.L_ref, path.chain, path.noise);
    const Trajectory ref = integrate(cfg.reference, model, ref_grid, path.chain, path.noise, path.uniforms);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      for (std::size_t li = 0; li < n_levels; ++li) {
        const int level = cfg.L_min + static_cast<int>(li);
        const LevelGrid grid(level, model.horizon);
        if (observer) observer(p, schemes[s], level, path.chain, path.noise);
        const auto start = std::chrono::steady_clock::now();
        const Trajectory traj = integrate(schemes[s], model, grid, path.chain, path.noise, path.uniforms);
        const auto stop = std::chrono::steady_clock::now();
        const std::size_t e = s * n_levels + li;
        seconds[tid][e] += std::chrono::duration<double>(stop - start).count();
        double err = 0.0;
        if (cfg.metric == ErrorMetric::Terminal) {
          err = detail::squared_distance(ref.terminal(), traj.terminal());
        } else {
          const std::size_t stride = std::size_t{1} << (cfg.L_ref - level);
          for (std::size_t j = 0; j < traj.size(); ++j) {
            err = std::max(err, detail::squared_distance(ref.at(j * stride), traj.at(j)));
          }
        }
        sq[p * n_entries + e] = err;
      }
    }
  });

  ErrorTable table;
  const double n = static_cast<double>(cfg.n_paths);
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (std::size_t li = n_levels; li-- > 0;) {
      const std::size_t e = s * n_levels + li;
      double sum = 0.0;
      for (std::size_t p = 0; p < cfg.n_paths; ++p) sum += sq[p * n_entries + e];
      const double mean = sum / n;
      double var = 0.0;
      for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const double dv = sq[p * n_entries + e] - mean;
        var += dv * dv;
      }
      var /= (n - 1.0);
      const double l2 = std::sqrt(mean);
      // Delta method: sd(sqrt(m)) ≈ sd(m) / (2 sqrt(m)).
      const double se = l2 > 0.0 ? std::sqrt(var / n) / (2.0 * l2) : 0.0;
      double cpu = 0.0;
      for (const auto& per_thread : seconds) cpu += per_thread[e];
      const int level = cfg.L_min + static_cast<int>(li);
      table.rows.push_back({schemes[s], level, LevelGrid(level, model.horizon).step(), cfg.n_paths, l2, cpu, se});
    }
    const auto rows = table.rows_for(schemes[s]);
    const bool fittable =
        rows.size() >= 3 && std::all_of(rows.begin(), rows.end(), [](const ErrorRow& r) { return r.l2_error > 0.0; });
    if (fittable) table.fitted_orders.emplace_back(schemes[s], fit_order(rows));
  }
  return table;
}

/// Fixed-point decimal with at least `significant` significant digits.
inline std::string format_decimal(double v, int significant = 10) {
  if (v == 0.0) return "0";
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(v))));
  const int decimals = std::clamp(significant - 1 - exponent, 0, 40);
  char buf[128];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kCsvHeader = "scheme,level,h,n_paths,l2_error,cpu_seconds,stderr";

inline void write_csv(const ErrorTable& table, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    os << to_string(r.scheme) << ',' << r.level << ',' << format_decimal(r.h) << ',' << r.n_paths << ','
       << format_decimal(r.l2_error) << ',' << format_decimal(r.cpu_seconds) << ',' << format_decimal(r.std_error)
       << '\n';
  }
  for (const auto& [k, order] : table.fitted_orders) os << "# order," << to_string(k) << ',' << format_decimal(order) << '\n';
}

inline void write_csv(const ErrorTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(table, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Inverse of write_csv; comment lines other than `# order,...` are skipped.
inline ErrorTable read_csv(std::istream& is) {
  ErrorTable table;
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw IoError("csv: missing or unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.rfind("# order,", 0) == 0) {
      if (f.size() != 3) throw IoError("csv: malformed order line");
      table.fitted_orders.emplace_back(parse_scheme(f[1]), std::stod(f[2]));
      continue;
    }
    if (line[0] == '#') continue;
    if (f.size() != 7) throw IoError("csv: expected 7 fields in '" + line + "'");
    table.rows.push_back({parse_scheme(f[0]), std::stoi(f[1]), std::stod(f[2]),
                          static_cast<std::size_t>(std::stoull(f[3])), std::stod(f[4]), std::stod(f[5]),
                          std::stod(f[6])});
  }
  return table;
}

/// Empirical P(N_0^w ≥ k) against the bound (𝔮w)^k, 𝔮 = max_i(−q_ii).
struct SwitchCountStat {
  double window;
  int k;
  double empirical;
  double std_error;
  double bound;
};

inline std::vector<SwitchCountStat> chain_switch_stats(const GeneratorMatrix& q, State i0, double horizon,
                                                       std::size_t samples, std::uint64_t seed,
                                                       const std::vector<double>& windows = {0.25, 0.5, 1.0},
                                                       const std::vector<int>& ks = {1, 2, 3}) {
  if (samples < 2) throw ArgumentError("chain_switch_stats: need at least 2 samples");
  std::vector<double> used;
  for (double w : windows) {
    if (w > 0.0 && w <= horizon) used.push_back(w);
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::vector<std::size_t> hits(used.size() * ks.size(), 0);
  Stream stream(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const ChainPath path = simulate_chain(q, i0, horizon, stream);
    for (std::size_t wi = 0; wi < used.size(); ++wi) {
      const std::size_t n = path.count_switches(0.0, used[wi]);
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        if (n >= static_cast<std::size_t>(ks[ki])) ++hits[wi * ks.size() + ki];
      }
    }
  }
  std::vector<SwitchCountStat> out;
  const double rate = q.max_exit_rate();
  for (std::size_t wi = 0; wi < used.size(); ++wi) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const double p = static_cast<double>(hits[wi * ks.size() + ki]) / static_cast<double>(samples);
      out.push_back({used[wi], ks[ki], p, std::sqrt(p * (1.0 - p) / static_cast<double>(samples)),
                     std::pow(rate * used[wi], ks[ki])});
    }
  }
  return out;
}

}  // namespace sdewms
