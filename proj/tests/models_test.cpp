#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <sdewms/models.hpp>
#include <sdewms/random.hpp>

#include "test_support.hpp"

namespace sdewms {
namespace {

double b1(const Model& m, double x, State i) { return m.b(0.0, std::vector<double>{x}, i)[0]; }
double s1(const Model& m, double x, State i) { return m.sigma(0.0, std::vector<double>{x}, i)[0]; }
double j1(const Model& m, double x, State i) { return m.jacobian(0.0, std::vector<double>{x}, i, 0)[0]; }

TEST(Builtins, Ex1Coefficients) {
  const Model m = make_builtin(BuiltinModel::Ex1);
  EXPECT_EQ(b1(m, -2.0, 0), 2.0);
  EXPECT_DOUBLE_EQ(b1(m, -2.0, 1), std::sin(2.0));
  EXPECT_EQ(s1(m, std::numbers::pi / 2, 1), 1.0);
  EXPECT_NEAR(j1(m, std::numbers::pi / 2, 1), 0.0, 1e-16);
  EXPECT_EQ(m.x0, std::vector<double>{1.0});
  EXPECT_EQ(m.i0, 1u);
  EXPECT_EQ(m.horizon, 1.0);
  EXPECT_EQ(m.generator(0, 1), 0.5);
  EXPECT_EQ(m.generator(1, 1), -0.5);
}

TEST(Builtins, MeanRevertingAndGbm) {
  const Model mr = make_builtin(BuiltinModel::MeanReverting);
  EXPECT_EQ(b1(mr, 2.0, 0), 0.0);
  EXPECT_DOUBLE_EQ(b1(mr, 0.0, 1), 2.0);
  EXPECT_DOUBLE_EQ(s1(mr, 3.0, 1), 1.5);

  const Model g = make_builtin(BuiltinModel::Gbm);
  for (double x : {-1.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(j1(g, x, 1) * s1(g, x, 1), 0.36 * x);
  EXPECT_DOUBLE_EQ(b1(g, 2.0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s1(g, 2.0, 0), 2.4);
}

TEST(Builtins, NamesRoundTrip) {
  for (auto k : kBuiltinModels) EXPECT_EQ(parse_builtin_model(to_string(k)), k);
  EXPECT_THROW(parse_builtin_model("heston"), ConfigError);
}

TEST(Builtins, AnalyticJacobianMatchesCentralDifference) {
  Stream s(10);
  for (auto which : kBuiltinModels) {
    const Model m = make_builtin(which);
    for (int probe = 0; probe < 100; ++probe) {
      const double x = 6.0 * s.uniform() - 3.0;
      const State i = s.uniform() < 0.5 ? 0 : 1;
      const double eps = 1e-6;
      const double fd = (s1(m, x + eps, i) - s1(m, x - eps, i)) / (2 * eps);
      const double an = j1(m, x, i);
      EXPECT_NEAR(an, fd, 1e-4 * std::max(1.0, std::abs(an))) << to_string(which) << " x=" << x;
    }
  }
}

TEST(Builtins, Ex1DriftIsOneLipschitz) {
  Stream s(12);
  const Model m = make_ex1();
  for (int probe = 0; probe < 1000; ++probe) {
    const double x = 20.0 * s.uniform() - 10.0, y = 20.0 * s.uniform() - 10.0;
    for (State i : {State{0}, State{1}}) EXPECT_LE(std::abs(b1(m, x, i) - b1(m, y, i)), std::abs(x - y) + 1e-15);
  }
}

TEST(Builtins, LinearGrowthWithConstantTwo) {
  Stream s(13);
  for (auto which : kBuiltinModels) {
    const Model m = make_builtin(which);
    for (int probe = 0; probe < 1000; ++probe) {
      const double x = 200.0 * s.uniform() - 100.0;
      for (State i : {State{0}, State{1}}) {
        const double bound = 2.0 * (1.0 + std::abs(x));
        EXPECT_LE(std::abs(b1(m, x, i)), bound) << to_string(which);
        EXPECT_LE(std::abs(s1(m, x, i)), bound) << to_string(which);
      }
    }
  }
}

TEST(DerivativeFree, DifferenceQuotient) {
  const Model m = make_ex1();
  EXPECT_DOUBLE_EQ(derivative_free_jac(m, 0.0, 1.0, 0, 0.25), 1.0);
  EXPECT_NEAR(derivative_free_jac(m, 0.0, 0.0, 1, 0.25), 0.98961583701809, 1e-12);
  EXPECT_EQ(derivative_free_jac(testing::constant_model(1.0, 0.0), 0.0, 3.0, 0, 0.1), 0.0);
  EXPECT_THROW(derivative_free_jac(m, 0.0, 1.0, 0, 0.0), ArgumentError);
}

Model diagonal_linear_2d(bool commuting) {
  // σ_ℓ(x) = C_ℓ x with C_1 = diag(1, 2); C_2 = diag(3, 4) commutes, [[0,1],[1,0]] does not.
  Model m;
  m.name = commuting ? "diag2d" : "noncomm2d";
  m.dim_x = 2;
  m.dim_w = 2;
  m.x0 = {1.0, 1.0};
  m.drift = [](double, std::span<const double> x, State, std::span<double> out) {
    out[0] = -x[0];
    out[1] = -x[1];
  };
  auto c = [commuting](std::size_t l, std::size_t a, std::size_t b) -> double {
    if (l == 0) return a == b ? (a == 0 ? 1.0 : 2.0) : 0.0;
    if (commuting) return a == b ? (a == 0 ? 3.0 : 4.0) : 0.0;
    return a == b ? 0.0 : 1.0;
  };
  m.diffusion = [c](double, std::span<const double> x, State, std::span<double> out) {
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t a = 0; a < 2; ++a) out[l * 2 + a] = c(l, a, 0) * x[0] + c(l, a, 1) * x[1];
  };
  m.diffusion_jacobian = [c](double, std::span<const double>, State, std::size_t l, std::span<double> out) {
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) out[a * 2 + b] = c(l, a, b);
  };
  m.commutative = true;
  return m;
}

TEST(ValidateModel, CommutativityProbe) {
  EXPECT_NO_THROW(validate_model(diagonal_linear_2d(true)));
  EXPECT_THROW(validate_model(diagonal_linear_2d(false)), ValidationError);
  Model flagged = diagonal_linear_2d(false);
  flagged.commutative = false;
  EXPECT_NO_THROW(validate_model(flagged));
}

TEST(ValidateModel, StructuralChecks) {
  Model m = make_ex1();
  m.commutative = false;
  EXPECT_THROW(validate_model(m), ValidationError);  // scalar noise is commutative
  m = make_ex1();
  m.x0 = {1.0, 2.0};
  EXPECT_THROW(validate_model(m), ValidationError);
  m = make_ex1();
  m.i0 = 5;
  EXPECT_THROW(validate_model(m), ValidationError);
  EXPECT_THROW(derivative_free_jac(diagonal_linear_2d(true), 0.0, 1.0, 0, 0.1), UnsupportedModel);
  EXPECT_THROW(make_gbm(GbmParams{{1.0}, {1.0}}), ValidationError);
}

}  // namespace
}  // namespace sdewms
