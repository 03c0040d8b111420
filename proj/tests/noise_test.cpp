#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <sdewms/experiment.hpp>
#include <sdewms/noise.hpp>

#include "test_support.hpp"

namespace sdewms {
namespace {

using testing::ScriptedStream;

TEST(LevelGrid, DyadicPointsNestBitwise) {
  const LevelGrid coarse(5, 1.7), fine(9, 1.7);
  for (std::size_t j = 0; j <= coarse.n_steps(); ++j) EXPECT_EQ(coarse.point(j), fine.point(j << 4));
  EXPECT_EQ(fine.point(0), 0.0);
  EXPECT_EQ(fine.point(fine.n_steps()), 1.7);
  EXPECT_THROW(LevelGrid(-1, 1.0), ArgumentError);
  EXPECT_THROW(LevelGrid(3, 0.0), ArgumentError);
}

TEST(DrawUniforms, EvalTimesFromStubbedStream) {
  ScriptedStream s({0.5, 0.25});
  const auto v = draw_uniforms_finest(LevelGrid(1, 1.0), s);
  EXPECT_EQ(v.u, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(v.eval_times, (std::vector<double>{0.25, 0.625}));

  ScriptedStream zeros({0.0});
  const auto z = draw_uniforms_finest(LevelGrid(3, 1.0), zeros);
  for (std::size_t j = 0; j < z.eval_times.size(); ++j) EXPECT_EQ(z.eval_times[j], z.grid.point(j));

  Stream r(3);
  const auto w = draw_uniforms_finest(LevelGrid(8, 2.0), r);
  for (std::size_t j = 0; j < w.eval_times.size(); ++j) {
    EXPECT_GE(w.u[j], 0.0);
    EXPECT_LT(w.u[j], 1.0);
    EXPECT_GE(w.eval_times[j], w.grid.point(j));
    EXPECT_LT(w.eval_times[j], w.grid.point(j + 1));
  }
  EXPECT_THROW(draw_uniforms_finest(LevelGrid(0, 1.0), r), ArgumentError);
}

TEST(CoarsenUniforms, SelectionRule) {
  ScriptedStream fine_s({0.5, 0.5});
  const auto fine = draw_uniforms_finest(LevelGrid(1, 1.0), fine_s);

  ScriptedStream first({0.1});
  const auto c1 = coarsen_uniforms(fine, first);
  EXPECT_EQ(c1.eval_times[0], 0.25);
  EXPECT_EQ(c1.u[0], 0.25);

  ScriptedStream second({0.9});
  const auto c2 = coarsen_uniforms(fine, second);
  EXPECT_EQ(c2.eval_times[0], 0.75);
  EXPECT_EQ(c2.u[0], 0.75);

  EXPECT_THROW(coarsen_uniforms(c2, second), ArgumentError);
}

TEST(CoarsenUniforms, CoarseUniformsAreUniform) {
  Stream s(123);
  std::vector<double> coarse_u;
  for (int i = 0; i < 10000; ++i) {
    const auto fine = draw_uniforms_finest(LevelGrid(1, 1.0), s);
    coarse_u.push_back(coarsen_uniforms(fine, s).u[0]);
  }
  const double d = testing::ks_statistic(coarse_u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_LT(d, testing::ks_critical_001(coarse_u.size()));
}

TEST(UniformFamily, EvalTimesNestAcrossLevels) {
  Stream s(8);
  const UniformFamily fam(LevelGrid(10, 1.0), 2, s);
  EXPECT_EQ(fam.min_level(), 2);
  EXPECT_EQ(fam.max_level(), 10);
  const auto& finest = fam.at(10).eval_times;
  for (int l = 2; l < 10; ++l) {
    const auto& v = fam.at(l);
    EXPECT_EQ(v.grid.level(), l);
    for (std::size_t j = 0; j < v.eval_times.size(); ++j) {
      EXPECT_TRUE(std::binary_search(finest.begin(), finest.end(), v.eval_times[j]));
      EXPECT_GE(v.eval_times[j], v.grid.point(j));
      EXPECT_LT(v.eval_times[j], v.grid.point(j + 1));
    }
  }
  EXPECT_THROW(fam.at(1), ArgumentError);
}

TEST(BuildTimeSet, ExamplesWithSwitchesAndDuplicates) {
  ScriptedStream half({0.5});
  const auto vars = draw_uniforms_finest(LevelGrid(1, 1.0), half);
  const std::vector<LevelGrid> grids{LevelGrid(1, 1.0)};
  const std::vector<LevelUniforms> vv{vars};

  EXPECT_EQ(build_time_set(grids, ChainPath(0, {}, 1.0), vv), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ(build_time_set(grids, ChainPath(0, {{0.3, 1}}, 1.0), vv),
            (std::vector<double>{0, 0.25, 0.3, 0.5, 0.75, 1}));
  EXPECT_EQ(build_time_set(grids, ChainPath(0, {{0.5, 1}}, 1.0), vv), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));

  const std::vector<LevelGrid> other{LevelGrid(1, 2.0)};
  EXPECT_THROW(build_time_set(other, ChainPath(0, {}, 1.0), vv), ArgumentError);
}

TEST(BuildTimeSet, ContainsEveryRequiredTime) {
  Stream s(4);
  const Model m = make_ex1(GeneratorMatrix({{-5.0, 5.0}, {5.0, -5.0}}));
  const auto path = make_coupled_path(m, 2, 9, 77, 3);
  const auto& t = path.noise.times();
  EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
  EXPECT_EQ(std::adjacent_find(t.begin(), t.end()), t.end());
  for (const auto& lv : path.uniforms.levels()) {
    for (double x : lv.grid.points()) EXPECT_TRUE(std::binary_search(t.begin(), t.end(), x));
    for (double x : lv.eval_times) EXPECT_TRUE(std::binary_search(t.begin(), t.end(), x));
  }
  for (const auto& e : path.chain.events()) EXPECT_TRUE(std::binary_search(t.begin(), t.end(), e.time));
}

TEST(SampleBrownian, StubbedIncrements) {
  ScriptedStream zero({0.0}, {0.0});
  const auto flat = sample_brownian({0.0, 0.1, 0.5, 1.0}, 2, zero);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(flat.value(k)[0], 0.0);
    EXPECT_EQ(flat.value(k)[1], 0.0);
  }
  ScriptedStream one({0.0}, {1.0});
  EXPECT_EQ(sample_brownian({0.0, 1.0}, 1, one).value_at(1.0)[0], 1.0);
  EXPECT_THROW(sample_brownian({0.0, 0.5, 0.4}, 1, one), ArgumentError);
  EXPECT_THROW(sample_brownian({0.1, 0.5}, 1, one), ArgumentError);
}

TEST(SampleBrownian, IncrementVarianceMatchesElapsedTime) {
  Stream s(31);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_brownian({0.0, 0.25, 0.75, 1.0}, 1, s);
    const double inc = p.increment(0.25, 0.75, 0);
    sum += inc;
    sum2 += inc * inc;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // Var of the sample variance of N(0, 0.5) is 2·0.5²/n.
  EXPECT_NEAR(var, 0.5, 3.0 * std::sqrt(2.0 * 0.25 / n));
}

TEST(NoisePath, IncrementLookupAndAdditivity) {
  Stream s(2);
  const auto p = sample_brownian({0.0, 0.125, 0.3, 0.5, 1.0}, 1, s);
  EXPECT_EQ(p.increment(0.3, 0.3, 0), 0.0);
  EXPECT_DOUBLE_EQ(p.increment(0.125, 1.0, 0), p.increment(0.125, 0.3, 0) + p.increment(0.3, 1.0, 0));
  EXPECT_THROW(p.increment(0.2, 0.5, 0), LookupError);
  EXPECT_THROW(p.index_from(0, 0.31), LookupError);
  EXPECT_EQ(p.index_from(1, 1.0), 4u);
  EXPECT_EQ(p.index_from(4, 0.125), 1u);

  ScriptedStream zero({0.0}, {0.0});
  const auto flat = sample_brownian({0.0, 0.5, 1.0}, 1, zero);
  EXPECT_EQ(flat.increment(0.0, 1.0, 0), 0.0);
}

TEST(NoisePath, CoarseIncrementIsSumOfFineIncrements) {
  const Model m = make_ex1();
  const auto path = make_coupled_path(m, 3, 8, 5, 0);
  const LevelGrid coarse(7, 1.0), fine(8, 1.0);
  for (std::size_t j = 0; j < coarse.n_steps(); ++j) {
    const double a = coarse.point(j), mid = fine.point(2 * j + 1), b = coarse.point(j + 1);
    const double ba = path.noise.value_at(a)[0], bm = path.noise.value_at(mid)[0], bb = path.noise.value_at(b)[0];
    EXPECT_EQ(bb - ba, (bb - bm) + (bm - ba));
    EXPECT_EQ(path.noise.increment(a, b, 0), bb - ba);
  }
}

TEST(CoupledPath, ByteReproducibleForFixedSeed) {
  const Model m = make_ex1(GeneratorMatrix({{-3.0, 3.0}, {3.0, -3.0}}));
  const auto a = make_coupled_path(m, 2, 8, 1234, 9);
  const auto b = make_coupled_path(m, 2, 8, 1234, 9);
  EXPECT_EQ(a.noise.times(), b.noise.times());
  for (std::size_t k = 0; k < a.noise.times().size(); ++k) EXPECT_EQ(a.noise.value(k)[0], b.noise.value(k)[0]);
  EXPECT_EQ(a.chain.events(), b.chain.events());
  for (int l = 2; l <= 8; ++l) EXPECT_EQ(a.uniforms.at(l).eval_times, b.uniforms.at(l).eval_times);
  const auto c = make_coupled_path(m, 2, 8, 1234, 10);
  EXPECT_NE(a.noise.value(1)[0], c.noise.value(1)[0]);
}

}  // namespace
}  // namespace sdewms
