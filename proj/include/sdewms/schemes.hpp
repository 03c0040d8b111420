#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "models.hpp"
#include "noise.hpp"

namespace sdewms {

enum class SchemeKind {
  Euler,
  Milstein,
  RandMilstein,
  ModifiedRand,
  ReducedRand,
  ModifiedNonRand,
  ReducedNonRand,
  DerivFreeModifiedNonRand,
  DerivFreeReducedNonRand,
};

inline constexpr std::array<SchemeKind, 9> kAllSchemes{
    SchemeKind::Euler,           SchemeKind::Milstein,       SchemeKind::RandMilstein,
    SchemeKind::ModifiedRand,    SchemeKind::ReducedRand,    SchemeKind::ModifiedNonRand,
    SchemeKind::ReducedNonRand,  SchemeKind::DerivFreeModifiedNonRand, SchemeKind::DerivFreeReducedNonRand,
};

inline std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::Euler: return "euler";
    case SchemeKind::Milstein: return "milstein";
    case SchemeKind::RandMilstein: return "rand-milstein";
    case SchemeKind::ModifiedRand: return "modified-rand";
    case SchemeKind::ReducedRand: return "reduced-rand";
    case SchemeKind::ModifiedNonRand: return "modified";
    case SchemeKind::ReducedNonRand: return "reduced";
    case SchemeKind::DerivFreeModifiedNonRand: return "df-modified";
    case SchemeKind::DerivFreeReducedNonRand: return "df-reduced";
  }
  return "?";
}

inline SchemeKind parse_scheme(std::string_view name) {
  for (auto k : kAllSchemes) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

/// Which increment multiplies the regime-switch correction σ(r_j) − σ(r_{j-1}).
enum class SwitchCorrection {
  FromFirstSwitch,  // B(t_j) − B(τ_1): the first-order scheme
  FromStepStart,    // B(t_j) − B(t_{j-1}): modified
  None,             // reduced
};

enum class JacobianSource { Analytic, DifferenceQuotient };

inline constexpr bool is_randomized(SchemeKind k) {
  return k == SchemeKind::RandMilstein || k == SchemeKind::ModifiedRand || k == SchemeKind::ReducedRand;
}

inline constexpr SwitchCorrection switch_correction(SchemeKind k) {
  switch (k) {
    case SchemeKind::Milstein:
    case SchemeKind::RandMilstein: return SwitchCorrection::FromFirstSwitch;
    case SchemeKind::ModifiedRand:
    case SchemeKind::ModifiedNonRand:
    case SchemeKind::DerivFreeModifiedNonRand: return SwitchCorrection::FromStepStart;
    default: return SwitchCorrection::None;
  }
}

inline constexpr JacobianSource jacobian_source(SchemeKind k) {
  return (k == SchemeKind::DerivFreeModifiedNonRand || k == SchemeKind::DerivFreeReducedNonRand)
             ? JacobianSource::DifferenceQuotient
             : JacobianSource::Analytic;
}

/// Everything a single step needs to know about step j.
struct StepContext {
  std::size_t j = 1;
  double t_prev = 0.0;
  double t_next = 0.0;
  double h = 0.0;
  double u = 0.0;
  double t_eval = 0.0;  // t_prev + h·u, or the coarsened eval time taken verbatim
  State r_prev = 0;
  State r_eval = 0;
  State r_next = 0;
  std::size_t n_switch = 0;
  std::optional<double> tau1;
  std::size_t noise_hint = 0;  // index at or before t_prev in the noise path

  /// Fills the regime fields from the chain.
  static StepContext make(std::size_t j, double t_prev, double t_next, double u, double t_eval,
                          const ChainPath& chain) {
    StepContext c;
    c.j = j;
    c.t_prev = t_prev;
    c.t_next = t_next;
    c.h = t_next - t_prev;
    c.u = u;
    c.t_eval = t_eval;
    c.r_prev = chain.state_at(t_prev);
    c.r_eval = chain.state_at(t_eval);
    c.r_next = chain.state_at(t_next);
    c.n_switch = chain.count_switches(t_prev, t_next);
    c.tau1 = chain.first_switch_in(t_prev, t_next);
    return c;
  }
};

/// Scratch buffers sized for one model; reuse across steps to avoid allocation.
class Workspace {
 public:
  explicit Workspace(const Model& m)
      : d_(m.dim_x),
        dw_(m.dim_w),
        drift_(d_),
        sigma_(d_ * dw_),
        sigma_next_(d_ * dw_),
        jac_(d_ * d_),
        db_(dw_),
        db_switch_(dw_),
        x_pred_(d_) {}

 private:
  std::size_t d_, dw_;
  std::vector<double> drift_, sigma_, sigma_next_, jac_, db_, db_switch_, x_pred_;

  friend class Stepper;
};

/// Implementation of the single-step maps. Every public step_* function below
/// is a thin allocating wrapper around these.
class Stepper {
 public:
  Stepper(const Model& model, const NoisePath& noise) : m_(model), noise_(noise), ws_(model) {
    if (noise.dim() != model.dim_w) throw ArgumentError("stepper: noise dimension differs from model dim_w");
  }

  /// X^{h,u} = x + b(t_{j-1}, x, r_{j-1})·h·u + Σ_ℓ σ_ℓ(t_{j-1}, x, r_{j-1})·(B_ℓ(t^u) − B_ℓ(t_{j-1})).
  void predictor(const StepContext& c, std::span<const double> x, std::span<double> out) {
    const std::size_t k_prev = noise_.index_from(c.noise_hint, c.t_prev);
    const std::size_t k_eval = noise_.index_from(k_prev, c.t_eval);
    m_.drift(c.t_prev, x, c.r_prev, ws_.drift_);
    m_.diffusion(c.t_prev, x, c.r_prev, ws_.sigma_);
    const auto b_prev = noise_.value(k_prev);
    const auto b_eval = noise_.value(k_eval);
    const double hu = c.h * c.u;
    for (std::size_t a = 0; a < ws_.d_; ++a) {
      double noise_term = 0.0;
      for (std::size_t l = 0; l < ws_.dw_; ++l) noise_term += ws_.sigma_[l * ws_.d_ + a] * (b_eval[l] - b_prev[l]);
      out[a] = x[a] + ws_.drift_[a] * hu + noise_term;
    }
  }

  /// x + b(t_{j-1}, x, r_{j-1})·h + Σ_ℓ σ_ℓ·ΔB_ℓ.
  void euler(const StepContext& c, std::span<const double> x, std::span<double> out) {
    const std::size_t k_prev = noise_.index_from(c.noise_hint, c.t_prev);
    const std::size_t k_next = noise_.index_from(k_prev, c.t_next);
    m_.drift(c.t_prev, x, c.r_prev, ws_.drift_);
    m_.diffusion(c.t_prev, x, c.r_prev, ws_.sigma_);
    const auto b_prev = noise_.value(k_prev);
    const auto b_next = noise_.value(k_next);
    for (std::size_t a = 0; a < ws_.d_; ++a) {
      double noise_term = 0.0;
      for (std::size_t l = 0; l < ws_.dw_; ++l) noise_term += ws_.sigma_[l * ws_.d_ + a] * (b_next[l] - b_prev[l]);
      out[a] = x[a] + ws_.drift_[a] * c.h + noise_term;
    }
  }

  /// Commutative Milstein corrector:
  ///   x + b(t^u, x_pred, r^u)·h + Σ_ℓ σ_ℓ ΔB_ℓ
  ///     + ½ Σ_{ℓ1,ℓ2} D_xσ_{ℓ1} σ_{ℓ2} (ΔB_{ℓ2} ΔB_{ℓ1} − 1{ℓ1=ℓ2} h)
  ///     + 1{N=1} Σ_ℓ (σ_ℓ(r_j) − σ_ℓ(r_{j-1})) · (B_ℓ(t_j) − B_ℓ(start))
  /// with start = τ_1, t_{j-1}, or the last term dropped, per `correction`.
  void corrector(const StepContext& c, std::span<const double> x, std::span<const double> x_pred,
                 SwitchCorrection correction, JacobianSource jac_source, std::span<double> out) {
    const std::size_t d = ws_.d_;
    const std::size_t dw = ws_.dw_;
    const std::size_t k_prev = noise_.index_from(c.noise_hint, c.t_prev);
    const std::size_t k_next = noise_.index_from(k_prev, c.t_next);
    const auto b_prev = noise_.value(k_prev);
    const auto b_next = noise_.value(k_next);
    for (std::size_t l = 0; l < dw; ++l) ws_.db_[l] = b_next[l] - b_prev[l];

    const bool switch_term = correction != SwitchCorrection::None && c.n_switch == 1;
    if (switch_term) {
      double start_time = c.t_prev;
      if (correction == SwitchCorrection::FromFirstSwitch) {
        if (!c.tau1) throw ArgumentError("corrector: one switch recorded but no switching time given");
        start_time = *c.tau1;
      }
      const auto b_start = noise_.value(noise_.index_from(k_prev, start_time));
      for (std::size_t l = 0; l < dw; ++l) ws_.db_switch_[l] = b_next[l] - b_start[l];
      m_.diffusion(c.t_prev, x, c.r_next, ws_.sigma_next_);
    }

    m_.drift(c.t_eval, x_pred, c.r_eval, ws_.drift_);
    m_.diffusion(c.t_prev, x, c.r_prev, ws_.sigma_);

    for (std::size_t a = 0; a < d; ++a) out[a] = 0.0;
    // Milstein product term, accumulated column by column.
    for (std::size_t l1 = 0; l1 < dw; ++l1) {
      jacobian(c, x, l1, jac_source);
      for (std::size_t l2 = 0; l2 < dw; ++l2) {
        const double weight = ws_.db_[l2] * ws_.db_[l1] - (l1 == l2 ? c.h : 0.0);
        for (std::size_t a = 0; a < d; ++a) {
          double js = 0.0;
          for (std::size_t k = 0; k < d; ++k) js += ws_.jac_[a * d + k] * ws_.sigma_[l2 * d + k];
          out[a] += js * weight;
        }
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      double noise_term = 0.0;
      for (std::size_t l = 0; l < dw; ++l) noise_term += ws_.sigma_[l * d + a] * ws_.db_[l];
      double next = x[a] + ws_.drift_[a] * c.h + noise_term + 0.5 * out[a];
      if (switch_term) {
        double jump = 0.0;
        for (std::size_t l = 0; l < dw; ++l) {
          jump += (ws_.sigma_next_[l * d + a] - ws_.sigma_[l * d + a]) * ws_.db_switch_[l];
        }
        next += jump;
      }
      out[a] = next;
    }
  }

  /// Predictor followed by corrector, as one scheme step.
  void milstein_type(const StepContext& c, std::span<const double> x, SwitchCorrection correction,
                     JacobianSource jac_source, std::span<double> out) {
    predictor(c, x, ws_.x_pred_);
    corrector(c, x, ws_.x_pred_, correction, jac_source, out);
  }

 private:
  void jacobian(const StepContext& c, std::span<const double> x, std::size_t column, JacobianSource src) {
    if (src == JacobianSource::Analytic) {
      m_.diffusion_jacobian(c.t_prev, x, c.r_prev, column, ws_.jac_);
    } else {
      ws_.jac_[0] = derivative_free_jac(m_, c.t_prev, x[0], c.r_prev, c.h);
    }
  }

  const Model& m_;
  const NoisePath& noise_;
  Workspace ws_;
};

namespace detail {

inline void require_milstein_capable(const Model& m, JacobianSource src) {
  if (m.dim_w > 1 && !m.commutative) {
    throw UnsupportedModel(m.name + ": Milstein-type schemes need commutative diffusion (no Levy area sampling)");
  }
  if (src == JacobianSource::Analytic && !m.has_jacobian()) {
    throw UnsupportedModel(m.name + ": scheme needs an analytic diffusion Jacobian");
  }
  if (src == JacobianSource::DifferenceQuotient && !m.is_scalar()) {
    throw UnsupportedModel(m.name + ": derivative-free schemes need a scalar model");
  }
}

}  // namespace detail

inline std::vector<double> step_predictor(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                          const NoisePath& noise) {
  std::vector<double> out(m.dim_x);
  Stepper(m, noise).predictor(c, x_prev, out);
  return out;
}

inline std::vector<double> step_euler(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                      const NoisePath& noise) {
  std::vector<double> out(m.dim_x);
  Stepper(m, noise).euler(c, x_prev, out);
  return out;
}

inline std::vector<double> step_corrector(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                          std::span<const double> x_pred, const NoisePath& noise,
                                          SwitchCorrection correction,
                                          JacobianSource src = JacobianSource::Analytic) {
  detail::require_milstein_capable(m, src);
  std::vector<double> out(m.dim_x);
  Stepper(m, noise).corrector(c, x_prev, x_pred, correction, src, out);
  return out;
}

inline std::vector<double> step_rand_milstein(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                              std::span<const double> x_pred, const NoisePath& noise) {
  return step_corrector(m, c, x_prev, x_pred, noise, SwitchCorrection::FromFirstSwitch);
}

inline std::vector<double> step_modified(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                         std::span<const double> x_pred, const NoisePath& noise,
                                         JacobianSource src = JacobianSource::Analytic) {
  return step_corrector(m, c, x_prev, x_pred, noise, SwitchCorrection::FromStepStart, src);
}

inline std::vector<double> step_reduced(const Model& m, const StepContext& c, std::span<const double> x_prev,
                                        std::span<const double> x_pred, const NoisePath& noise,
                                        JacobianSource src = JacobianSource::Analytic) {
  return step_corrector(m, c, x_prev, x_pred, noise, SwitchCorrection::None, src);
}

/// X^h_j for j = 0..n_h, stored row-major (n_h + 1) × d.
class Trajectory {
 public:
  Trajectory(int level, std::size_t dim, std::vector<double> values)
      : level_(level), dim_(dim), values_(std::move(values)) {}

  int level() const noexcept { return level_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size() / dim_; }
  std::span<const double> at(std::size_t j) const {
    return std::span<const double>(values_).subspan(j * dim_, dim_);
  }
  std::span<const double> terminal() const { return at(size() - 1); }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  int level_;
  std::size_t dim_;
  std::vector<double> values_;
};

/// Runs `kind` over every step of `grid`. Randomised kinds read u_j and the
/// eval times from `vars` (which must match the grid level); the
/// non-randomised kinds use u_j = 0 and ignore `vars`.
inline Trajectory integrate(SchemeKind kind, const Model& model, const LevelGrid& grid, const ChainPath& chain,
                            const NoisePath& noise, const LevelUniforms* vars) {
  if (kind != SchemeKind::Euler) detail::require_milstein_capable(model, jacobian_source(kind));
  const bool randomized = is_randomized(kind);
  if (randomized) {
    if (vars == nullptr) throw ArgumentError(std::string(to_string(kind)) + ": randomised scheme needs uniforms");
    if (vars->grid.level() != grid.level() || vars->u.size() != grid.n_steps()) {
      throw ArgumentError(std::string(to_string(kind)) + ": uniforms do not match the grid level");
    }
  }
  if (chain.horizon() != grid.horizon()) throw ArgumentError("integrate: chain and grid horizons differ");
  if (model.x0.size() != model.dim_x) throw ValidationError(model.name + ": x0 has wrong dimension");

  const std::size_t d = model.dim_x;
  const std::size_t n = grid.n_steps();
  std::vector<double> values((n + 1) * d);
  std::copy(model.x0.begin(), model.x0.end(), values.begin());

  Stepper stepper(model, noise);
  const SwitchCorrection correction = switch_correction(kind);
  const JacobianSource src = jacobian_source(kind);
  std::size_t hint = 0;
  for (std::size_t j = 1; j <= n; ++j) {
    try {
      const double t_prev = grid.point(j - 1);
      const double u = randomized ? vars->u[j - 1] : 0.0;
      const double t_eval = randomized ? vars->eval_times[j - 1] : t_prev;
      StepContext c = StepContext::make(j, t_prev, grid.point(j), u, t_eval, chain);
      hint = noise.index_from(hint, t_prev);
      c.noise_hint = hint;
      const std::span<const double> x(values.data() + (j - 1) * d, d);
      const std::span<double> out(values.data() + j * d, d);
      if (kind == SchemeKind::Euler) {
        stepper.euler(c, x, out);
      } else {
        stepper.milstein_type(c, x, correction, src, out);
      }
    } catch (const LookupError& e) {
      throw LookupError(std::string(to_string(kind)) + " step " + std::to_string(j) + ": " + e.what());
    } catch (const UnsupportedModel& e) {
      throw UnsupportedModel(std::string(to_string(kind)) + " step " + std::to_string(j) + ": " + e.what());
    }
  }
  return Trajectory(grid.level(), d, std::move(values));
}

inline Trajectory integrate(SchemeKind kind, const Model& model, const LevelGrid& grid, const ChainPath& chain,
                            const NoisePath& noise, const UniformFamily& vars) {
  const LevelUniforms* level_vars = is_randomized(kind) ? &vars.at(grid.level()) : nullptr;
  return integrate(kind, model, grid, chain, noise, level_vars);
}

}  // namespace sdewms
