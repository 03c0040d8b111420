#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace sdewms {

/// Coefficients of dX = b(t,X,r)dt + Σ_ℓ σ_ℓ(t,X,r)dB_ℓ with r a Markov chain.
///
/// Callbacks write into caller-owned buffers so the steppers never allocate:
///   drift:              out[d]
///   diffusion:          out[d·d̃], column ℓ stored contiguously at out[ℓ·d .. ℓ·d+d)
///   diffusion_jacobian: out[d·d] for column ℓ, row-major: out[a·d+b] = ∂σ_{ℓ,a}/∂x_b
struct Model {
  using DriftFn = std::function<void(double t, std::span<const double> x, State i, std::span<double> out)>;
  using DiffusionFn = DriftFn;
  using JacobianFn =
      std::function<void(double t, std::span<const double> x, State i, std::size_t column, std::span<double> out)>;

  std::string name;
  std::size_t dim_x = 1;
  std::size_t dim_w = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  JacobianFn diffusion_jacobian;  // empty for derivative-free use only
  bool commutative = true;
  std::vector<double> x0{1.0};
  State i0 = 0;
  double horizon = 1.0;
  GeneratorMatrix generator = GeneratorMatrix::singleton();

  std::size_t n_states() const noexcept { return generator.n_states(); }
  bool has_jacobian() const noexcept { return static_cast<bool>(diffusion_jacobian); }
  bool is_scalar() const noexcept { return dim_x == 1 && dim_w == 1; }

  // Allocating conveniences for tests and diagnostics.
  std::vector<double> b(double t, std::span<const double> x, State i) const {
    std::vector<double> out(dim_x);
    drift(t, x, i, out);
    return out;
  }
  std::vector<double> sigma(double t, std::span<const double> x, State i) const {
    std::vector<double> out(dim_x * dim_w);
    diffusion(t, x, i, out);
    return out;
  }
  std::vector<double> jacobian(double t, std::span<const double> x, State i, std::size_t column) const {
    if (!has_jacobian()) throw UnsupportedModel(name + ": no analytic diffusion Jacobian");
    std::vector<double> out(dim_x * dim_x);
    diffusion_jacobian(t, x, i, column, out);
    return out;
  }
};

/// Structural checks plus the commutativity probe: when the model claims
/// commutative noise with d̃ > 1, D_xσ_{ℓ1}σ_{ℓ2} = D_xσ_{ℓ2}σ_{ℓ1} must hold at
/// 100 random (t, x, i) probes to 1e-9.
template <RandomStream S>
void validate_model(const Model& m, S& stream) {
  if (m.dim_x == 0 || m.dim_w == 0) throw ValidationError(m.name + ": dimensions must be positive");
  if (!m.drift || !m.diffusion) throw ValidationError(m.name + ": drift and diffusion are required");
  if (m.x0.size() != m.dim_x) throw ValidationError(m.name + ": x0 has wrong dimension");
  if (m.i0 >= m.n_states()) throw ValidationError(m.name + ": initial state out of range");
  if (!(m.horizon > 0.0)) throw ValidationError(m.name + ": horizon must be positive");
  if (m.dim_w == 1 && !m.commutative) throw ValidationError(m.name + ": scalar noise is always commutative");
  if (!m.commutative || m.dim_w == 1 || !m.has_jacobian()) return;

  const std::size_t d = m.dim_x;
  std::vector<double> x(d), sig(d * m.dim_w), jac(d * d);
  std::vector<std::vector<double>> jac_sig(m.dim_w * m.dim_w, std::vector<double>(d));
  for (int probe = 0; probe < 100; ++probe) {
    const double t = m.horizon * stream.uniform();
    for (auto& xi : x) xi = 4.0 * stream.uniform() - 2.0;
    const State i = std::min<State>(static_cast<State>(stream.uniform() * m.n_states()), m.n_states() - 1);
    m.diffusion(t, x, i, sig);
    for (std::size_t l1 = 0; l1 < m.dim_w; ++l1) {
      m.diffusion_jacobian(t, x, i, l1, jac);
      for (std::size_t l2 = 0; l2 < m.dim_w; ++l2) {
        auto& v = jac_sig[l1 * m.dim_w + l2];
        for (std::size_t a = 0; a < d; ++a) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) s += jac[a * d + k] * sig[l2 * d + k];
          v[a] = s;
        }
      }
    }
    for (std::size_t l1 = 0; l1 < m.dim_w; ++l1) {
      for (std::size_t l2 = l1 + 1; l2 < m.dim_w; ++l2) {
        for (std::size_t a = 0; a < d; ++a) {
          if (std::abs(jac_sig[l1 * m.dim_w + l2][a] - jac_sig[l2 * m.dim_w + l1][a]) > 1e-9) {
            throw ValidationError(m.name + ": diffusion columns " + std::to_string(l1) + " and " +
                                  std::to_string(l2) + " do not commute");
          }
        }
      }
    }
  }
}

inline void validate_model(const Model& m) {
  Stream probe_stream(0x5eed);
  validate_model(m, probe_stream);
}

/// One-sided difference quotient (σ(t, x+step, i) − σ(t, x, i)) / step, the
/// stand-in for σ' in the derivative-free schemes. Scalar models only.
inline double derivative_free_jac(const Model& m, double t, double x, State i, double step) {
  if (!m.is_scalar()) throw UnsupportedModel(m.name + ": derivative-free Jacobian needs a scalar model");
  if (!(step > 0.0)) throw ArgumentError("derivative_free_jac: step must be positive");
  double lo = 0.0;
  double hi = 0.0;
  const double xs = x + step;
  m.diffusion(t, std::span<const double>(&x, 1), i, std::span<double>(&lo, 1));
  m.diffusion(t, std::span<const double>(&xs, 1), i, std::span<double>(&hi, 1));
  return (hi - lo) / step;
}

enum class BuiltinModel { Ex1, MeanReverting, Gbm };

inline constexpr std::array<BuiltinModel, 3> kBuiltinModels{BuiltinModel::Ex1, BuiltinModel::MeanReverting,
                                                             BuiltinModel::Gbm};

inline std::string_view to_string(BuiltinModel m) {
  switch (m) {
    case BuiltinModel::Ex1: return "ex1";
    case BuiltinModel::MeanReverting: return "mean-reverting";
    case BuiltinModel::Gbm: return "gbm";
  }
  return "?";
}

inline BuiltinModel parse_builtin_model(std::string_view name) {
  for (auto m : kBuiltinModels) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown model '" + std::string(name) + "' (expected ex1, mean-reverting, gbm)");
}

/// The two-regime switching generator shared by every built-in model.
inline GeneratorMatrix symmetric_two_state_generator() { return GeneratorMatrix({{-0.5, 0.5}, {0.5, -0.5}}); }

/// Scalar model with regime-wise coefficients. b, σ, σ' take (x, i).
template <class Drift, class Diff, class DiffPrime>
Model make_scalar_model(std::string name, Drift b, Diff sigma, DiffPrime sigma_prime, GeneratorMatrix q,
                        double x0, State i0, double horizon) {
  Model m;
  m.name = std::move(name);
  m.dim_x = 1;
  m.dim_w = 1;
  m.drift = [b](double, std::span<const double> x, State i, std::span<double> out) { out[0] = b(x[0], i); };
  m.diffusion = [sigma](double, std::span<const double> x, State i, std::span<double> out) {
    out[0] = sigma(x[0], i);
  };
  m.diffusion_jacobian = [sigma_prime](double, std::span<const double> x, State i, std::size_t,
                                       std::span<double> out) { out[0] = sigma_prime(x[0], i); };
  m.commutative = true;
  m.x0 = {x0};
  m.i0 = i0;
  m.horizon = horizon;
  m.generator = std::move(q);
  return m;
}

/// Non-differentiable drift: b = |x| / sin|x|, σ = x / sin x in regimes 0 / 1.
inline Model make_ex1(GeneratorMatrix q = symmetric_two_state_generator(), double x0 = 1.0, State i0 = 1,
                      double horizon = 1.0) {
  return make_scalar_model(
      "ex1", [](double x, State i) { return i == 0 ? std::abs(x) : std::sin(std::abs(x)); },
      [](double x, State i) { return i == 0 ? x : std::sin(x); },
      [](double x, State i) { return i == 0 ? 1.0 : std::cos(x); }, std::move(q), x0, i0, horizon);
}

struct MeanRevertingParams {
  std::vector<double> lambda{0.5, 2.0};
  std::vector<double> mu{2.0, 1.0};
  std::vector<double> sigma{1.0, 0.5};
};

/// dX = λ(r)(μ(r) − X)dt + σ(r)X dB.
inline Model make_mean_reverting(MeanRevertingParams p = {}, GeneratorMatrix q = symmetric_two_state_generator(),
                                 double x0 = 1.0, State i0 = 1, double horizon = 1.0) {
  const std::size_t n = q.n_states();
  if (p.lambda.size() != n || p.mu.size() != n || p.sigma.size() != n) {
    throw ValidationError("mean-reverting: need one lambda, mu and sigma per regime");
  }
  return make_scalar_model(
      "mean-reverting", [p](double x, State i) { return p.lambda[i] * (p.mu[i] - x); },
      [p](double x, State i) { return p.sigma[i] * x; }, [p](double, State i) { return p.sigma[i]; }, std::move(q),
      x0, i0, horizon);
}

struct GbmParams {
  std::vector<double> mu{0.5, 1.0};
  std::vector<double> nu{1.2, 0.6};
};

/// dX = μ(r)X dt + ν(r)X dB.
inline Model make_gbm(GbmParams p = {}, GeneratorMatrix q = symmetric_two_state_generator(), double x0 = 1.0,
                      State i0 = 1, double horizon = 1.0) {
  const std::size_t n = q.n_states();
  if (p.mu.size() != n || p.nu.size() != n) throw ValidationError("gbm: need one mu and nu per regime");
  return make_scalar_model(
      "gbm", [p](double x, State i) { return p.mu[i] * x; }, [p](double x, State i) { return p.nu[i] * x; },
      [p](double, State i) { return p.nu[i]; }, std::move(q), x0, i0, horizon);
}

inline Model make_builtin(BuiltinModel which) {
  switch (which) {
    case BuiltinModel::Ex1: return make_ex1();
    case BuiltinModel::MeanReverting: return make_mean_reverting();
    case BuiltinModel::Gbm: return make_gbm();
  }
  throw ArgumentError("make_builtin: unknown model");
}

}  // namespace sdewms
