#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <cstddef>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace sdewms {

/// Uniform dyadic partition t_j = j·T·2^{-L}, j = 0..2^L.
class LevelGrid {
 public:
  LevelGrid(int level, double horizon) : level_(level), horizon_(horizon) {
    if (level < 0 || level > 40) throw ArgumentError("level grid: level must be in [0, 40]");
    if (!(horizon > 0.0)) throw ArgumentError("level grid: horizon must be positive");
  }

  int level() const noexcept { return level_; }
  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return std::size_t{1} << level_; }
  double step() const noexcept { return std::ldexp(horizon_, -level_); }

  /// Exact for dyadic levels: point(j) at level L equals point(2j) at level L+1
  /// bit for bit.
  double point(std::size_t j) const noexcept {
    return std::ldexp(static_cast<double>(j), -level_) * horizon_;
  }

  std::vector<double> points() const {
    std::vector<double> p(n_steps() + 1);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = point(j);
    return p;
  }

 private:
  int level_;
  double horizon_;
};

/// Drift-randomisation variables for one level: u_j ∈ [0,1) and the matching
/// evaluation times t_{j-1} + h·u_j. After coarsening the stored eval time is
/// authoritative; u is recovered from it and may differ from the exact
/// quotient in the last bit.
struct LevelUniforms {
  LevelGrid grid;
  std::vector<double> u;
  std::vector<double> eval_times;
};

/// Draws 2^L fresh uniforms for the finest level.
template <RandomStream S>
LevelUniforms draw_uniforms_finest(const LevelGrid& grid, S& stream) {
  if (grid.level() < 1) throw ArgumentError("draw_uniforms_finest: level must be >= 1");
  LevelUniforms out{grid, std::vector<double>(grid.n_steps()), std::vector<double>(grid.n_steps())};
  const double h = grid.step();
  for (std::size_t j = 0; j < grid.n_steps(); ++j) {
    out.u[j] = stream.uniform();
    out.eval_times[j] = grid.point(j) + h * out.u[j];
  }
  return out;
}

/// One Bernoulli(1/2) draw per coarse step picks which of its two children's
/// eval time is reused verbatim, so every coarse eval time is also a fine one
/// and the implied coarse u stays uniform.
template <RandomStream S>
LevelUniforms coarsen_uniforms(const LevelUniforms& fine, S& stream) {
  if (fine.grid.level() < 1) throw ArgumentError("coarsen_uniforms: cannot coarsen level 0");
  const LevelGrid coarse(fine.grid.level() - 1, fine.grid.horizon());
  LevelUniforms out{coarse, std::vector<double>(coarse.n_steps()), std::vector<double>(coarse.n_steps())};
  const double coarse_h = coarse.step();
  for (std::size_t j = 0; j < coarse.n_steps(); ++j) {
    const bool first_child = stream.uniform() < 0.5;
    const double t = fine.eval_times[2 * j + (first_child ? 0 : 1)];
    out.eval_times[j] = t;
    out.u[j] = (t - coarse.point(j)) / coarse_h;
  }
  return out;
}

/// Uniforms for every level in [min_level, finest level]; index by level().
class UniformFamily {
 public:
  template <RandomStream S>
  UniformFamily(const LevelGrid& finest, int min_level, S& stream) : min_level_(min_level) {
    if (min_level < 0 || min_level > finest.level()) {
      throw ArgumentError("uniform family: min level outside [0, finest]");
    }
    levels_.push_back(draw_uniforms_finest(finest, stream));
    while (levels_.back().grid.level() > min_level) {
      levels_.push_back(coarsen_uniforms(levels_.back(), stream));
    }
    std::reverse(levels_.begin(), levels_.end());
  }

  int min_level() const noexcept { return min_level_; }
  int max_level() const noexcept { return levels_.back().grid.level(); }

  const LevelUniforms& at(int level) const {
    if (level < min_level_ || level > max_level()) {
      throw ArgumentError("uniform family: no uniforms at level " + std::to_string(level));
    }
    return levels_[static_cast<std::size_t>(level - min_level_)];
  }

  const std::vector<LevelUniforms>& levels() const noexcept { return levels_; }

 private:
  int min_level_;
  std::vector<LevelUniforms> levels_;
};

namespace detail {

inline std::vector<double> merge_unique(const std::vector<double>& a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Grid points and eval times of one level interleave into a sorted sequence.
inline std::vector<double> level_times(const LevelGrid& grid, const LevelUniforms* vars) {
  std::vector<double> t;
  t.reserve(2 * grid.n_steps() + 1);
  for (std::size_t j = 0; j <= grid.n_steps(); ++j) {
    t.push_back(grid.point(j));
    if (vars != nullptr && j < grid.n_steps()) t.push_back(vars->eval_times[j]);
  }
  return t;
}

}  // namespace detail

/// Sorted, deduplicated union of every grid point, every chain switch time and
/// every randomised evaluation time. Exact equality is the only dedup rule.
inline std::vector<double> build_time_set(std::span<const LevelGrid> grids, const ChainPath& chain,
                                          std::span<const LevelUniforms> vars) {
  const double horizon = chain.horizon();
  std::map<int, const LevelUniforms*> by_level;
  for (const auto& v : vars) {
    if (v.grid.horizon() != horizon) throw ArgumentError("build_time_set: mismatched horizons");
    by_level[v.grid.level()] = &v;
  }
  std::map<int, bool> levels;
  for (const auto& g : grids) {
    if (g.horizon() != horizon) throw ArgumentError("build_time_set: mismatched horizons");
    levels[g.level()] = true;
  }
  for (const auto& [lvl, _] : by_level) levels[lvl] = true;

  std::vector<double> times{0.0, horizon};
  for (const auto& [lvl, _] : levels) {
    const auto it = by_level.find(lvl);
    const auto lt = detail::level_times(LevelGrid(lvl, horizon), it == by_level.end() ? nullptr : it->second);
    times = detail::merge_unique(times, lt);
  }
  std::vector<double> switches;
  switches.reserve(chain.events().size());
  for (const auto& e : chain.events()) switches.push_back(e.time);
  return detail::merge_unique(times, switches);
}

inline std::vector<double> build_time_set(std::span<const LevelGrid> grids, const ChainPath& chain,
                                          const UniformFamily& family) {
  return build_time_set(grids, chain, std::span<const LevelUniforms>(family.levels()));
}

/// Brownian values B(t) ∈ R^dim on a fixed sorted set of times.
class NoisePath {
 public:
  NoisePath(std::vector<double> times, std::vector<double> values, std::size_t dim)
      : times_(std::move(times)), values_(std::move(values)), dim_(dim) {
    if (dim_ == 0) throw ArgumentError("noise path: dimension must be positive");
    if (times_.empty() || times_.front() != 0.0) throw ArgumentError("noise path: times must start at 0");
    if (values_.size() != times_.size() * dim_) throw ArgumentError("noise path: value count mismatch");
    if (std::adjacent_find(times_.begin(), times_.end(), std::greater_equal<>()) != times_.end()) {
      throw ArgumentError("noise path: times must be strictly increasing");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<double>& times() const noexcept { return times_; }

  std::size_t index_of(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end() || *it != t) throw LookupError("noise path: time " + format_time(t) + " not stored");
    return static_cast<std::size_t>(it - times_.begin());
  }

  /// Galloping search forward from `hint`: O(log distance) for monotone
  /// queries. Falls back to a full binary search if t lies before the hint.
  std::size_t index_from(std::size_t hint, double t) const {
    if (hint >= times_.size() || times_[hint] > t) return index_of(t);
    if (times_[hint] == t) return hint;
    std::size_t lo = hint;
    std::size_t step = 1;
    while (lo + step < times_.size() && times_[lo + step] < t) {
      lo += step;
      step *= 2;
    }
    const auto first = times_.begin() + static_cast<std::ptrdiff_t>(lo + 1);
    const auto last = times_.begin() + static_cast<std::ptrdiff_t>(std::min(lo + step + 1, times_.size()));
    const auto it = std::lower_bound(first, last, t);
    if (it == last || *it != t) throw LookupError("noise path: time " + format_time(t) + " not stored");
    return static_cast<std::size_t>(it - times_.begin());
  }

  std::span<const double> value(std::size_t index) const {
    return std::span<const double>(values_).subspan(index * dim_, dim_);
  }
  std::span<const double> value_at(double t) const { return value(index_of(t)); }

  /// B_ℓ(t) − B_ℓ(s) for stored s ≤ t.
  double increment(double s, double t, std::size_t coord) const {
    if (coord >= dim_) throw ArgumentError("increment: coordinate out of range");
    if (s > t) throw ArgumentError("increment: need s <= t");
    return value_at(t)[coord] - value_at(s)[coord];
  }

 private:
  static std::string format_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    return buf;
  }

  std::vector<double> times_;
  std::vector<double> values_;
  std::size_t dim_;
};

/// Brownian values live on the lattice 2^-40·Z: with |B| < 2^12 every
/// difference and every sum of differences of stored values is exact, so a
/// coarse increment equals the sum of its fine increments bit for bit.
inline constexpr double kBrownianLattice = 0x1p-40;

/// Sequential Gaussian increments: B(0) = 0, B(t_{k+1}) = B(t_k) + √Δt·Z,
/// each increment rounded to the lattice (a shift below 1e-12).
template <RandomStream S>
NoisePath sample_brownian(std::vector<double> times, std::size_t dim, S& stream) {
  if (times.empty() || times.front() != 0.0) throw ArgumentError("sample_brownian: times must start at 0");
  if (dim == 0) throw ArgumentError("sample_brownian: dimension must be positive");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw ArgumentError("sample_brownian: times must be strictly increasing");
  }
  std::vector<double> values(times.size() * dim, 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double sd = std::sqrt(times[k] - times[k - 1]);
    for (std::size_t l = 0; l < dim; ++l) {
      const double inc = std::nearbyint(sd * stream.normal() / kBrownianLattice) * kBrownianLattice;
      values[k * dim + l] = values[(k - 1) * dim + l] + inc;
    }
  }
  return NoisePath(std::move(times), std::move(values), dim);
}

}  // namespace sdewms
