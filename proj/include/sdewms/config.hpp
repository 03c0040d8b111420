#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "experiment.hpp"
#include "models.hpp"
#include "schemes.hpp"

namespace sdewms {

/// Flat `key = value` settings; `#` starts a comment. Keys mirror
/// ExperimentConfig field names plus the model-family parameters.
using Settings = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline double parse_double(std::string_view text, std::string_view what) {
  const std::string s = detail::trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(std::string(what) + ": '" + s + "' is not a number");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view text, std::string_view what) {
  const std::string s = detail::trim(text);
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(std::string(what) + ": '" + s + "' is not a valid integer");
  }
  return v;
}

inline bool parse_bool(std::string_view text, std::string_view what) {
  const std::string s = detail::trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(std::string(what) + ": '" + s + "' is not a boolean");
}

inline std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : detail::split(text, ',')) out.push_back(parse_double(item, what));
  return out;
}

/// Inclusive `A..B`.
inline std::pair<int, int> parse_level_range(std::string_view text) {
  const std::string s = detail::trim(text);
  const auto pos = s.find("..");
  if (pos == std::string::npos) throw ConfigError("level range '" + s + "' must look like A..B");
  const int a = parse_int<int>(std::string_view(s).substr(0, pos), "level range");
  const int b = parse_int<int>(std::string_view(s).substr(pos + 2), "level range");
  if (a > b) throw ConfigError("level range '" + s + "' is empty (A > B)");
  return {a, b};
}

/// Rows separated by `;`, entries by `,`: "-0.5,0.5;0.5,-0.5".
inline GeneratorMatrix parse_generator(std::string_view text) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : detail::split(text, ';')) rows.push_back(parse_double_list(row, "generator"));
  try {
    return GeneratorMatrix(rows);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline std::vector<SchemeKind> parse_scheme_list(std::string_view text) {
  std::vector<SchemeKind> out;
  for (const auto& name : detail::split(text, ',')) {
    if (!name.empty()) out.push_back(parse_scheme(name));
  }
  if (out.empty()) throw ConfigError("scheme list is empty");
  return out;
}

inline Settings parse_settings(std::istream& in) {
  Settings s;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    s[detail::trim(std::string_view(t).substr(0, eq))] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return s;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_settings(in);
}

/// Built-in family with optional overrides: q, x0, i0, T and the regime-wise
/// constants (lambda/mu/sigma for mean-reverting, mu/nu for gbm).
inline Model model_from_settings(const Settings& s) {
  auto get = [&](const char* key) -> const std::string* {
    const auto it = s.find(key);
    return it == s.end() ? nullptr : &it->second;
  };
  const BuiltinModel family = parse_builtin_model(get("model") ? *get("model") : "ex1");
  const GeneratorMatrix q = get("q") ? parse_generator(*get("q")) : symmetric_two_state_generator();
  const double x0 = get("x0") ? parse_double(*get("x0"), "x0") : 1.0;
  const State i0 = get("i0") ? parse_int<State>(*get("i0"), "i0") : (q.n_states() > 1 ? 1 : 0);
  const double horizon = get("T") ? parse_double(*get("T"), "T") : 1.0;
  if (i0 >= q.n_states()) throw ConfigError("i0 must be a valid state index");
  if (!(horizon > 0.0)) throw ConfigError("T must be positive");

  auto regime_list = [&](const char* key, const std::vector<double>& fallback) {
    if (const auto* v = get(key)) return parse_double_list(*v, key);
    if (fallback.size() != q.n_states()) {
      throw ConfigError(std::string(key) + " must be given when the generator has " +
                        std::to_string(q.n_states()) + " states");
    }
    return fallback;
  };
  try {
    switch (family) {
      case BuiltinModel::Ex1: {
        if (q.n_states() > 2) throw ConfigError("ex1 defines two regimes; generator has more states");
        return make_ex1(q, x0, i0, horizon);
      }
      case BuiltinModel::MeanReverting: {
        const MeanRevertingParams defaults;
        return make_mean_reverting({regime_list("lambda", defaults.lambda), regime_list("mu", defaults.mu),
                                    regime_list("sigma", defaults.sigma)},
                                   q, x0, i0, horizon);
      }
      case BuiltinModel::Gbm: {
        const GbmParams defaults;
        return make_gbm({regime_list("mu", defaults.mu), regime_list("nu", defaults.nu)}, q, x0, i0, horizon);
      }
    }
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown model family");
}

/// Keys: model (+ parameters), schemes, L_min, L_max, L_ref, n_paths, seed,
/// output_path, threads, max_error.
inline ExperimentConfig experiment_from_settings(const Settings& s) {
  ExperimentConfig cfg;
  cfg.model = model_from_settings(s);
  cfg.schemes = {SchemeKind::Euler, SchemeKind::ReducedNonRand, SchemeKind::ModifiedNonRand,
                 SchemeKind::ReducedRand, SchemeKind::ModifiedRand};
  cfg.L_min = 5;
  cfg.L_max = 10;
  cfg.L_ref = 13;
  cfg.n_paths = 10000;
  cfg.seed = 42;
  for (const auto& [key, value] : s) {
    if (key == "schemes") cfg.schemes = parse_scheme_list(value);
    else if (key == "L_min") cfg.L_min = parse_int<int>(value, key);
    else if (key == "L_max") cfg.L_max = parse_int<int>(value, key);
    else if (key == "L_ref") cfg.L_ref = parse_int<int>(value, key);
    else if (key == "n_paths") cfg.n_paths = parse_int<std::size_t>(value, key);
    else if (key == "seed") cfg.seed = parse_int<std::uint64_t>(value, key);
    else if (key == "output_path") cfg.output_path = value;
    else if (key == "threads") cfg.threads = parse_int<std::size_t>(value, key);
    else if (key == "max_error") cfg.metric = parse_bool(value, key) ? ErrorMetric::MaxOverGrid : ErrorMetric::Terminal;
    else if (key == "model" || key == "q" || key == "x0" || key == "i0" || key == "T" || key == "lambda" ||
             key == "mu" || key == "sigma" || key == "nu") continue;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace sdewms
