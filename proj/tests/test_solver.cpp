#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <vector>

#include "adavar/experiments.hpp"
#include "adavar/solver.hpp"

using namespace adavar;

namespace {

double chi2_critical(std::size_t dof, double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(static_cast<double>(dof)), alpha));
}

double chi2_uniform(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double x = 0.0;
  for (auto c : counts) x += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return x;
}

ScheduleState state(double eta, double lo, double hi, double cutoff) {
  ScheduleState s;
  s.eta = eta;
  s.sigma_low = lo;
  s.sigma_high = hi;
  s.cutoff = cutoff;
  return s;
}

SolverConfig practical_config(double c, std::size_t iterations) {
  const Objective f = rastrigin({1, 1, c, 2});
  return SolverConfig{Variant::two_stage, f, BoxDomain::cube(2, -20, 20), PracticalSchedule{}, iterations};
}

}  // namespace

TEST(StepRestart, FixedPointWithoutGradientOrNoise) {
  const Objective f = zero_objective(2);
  const BoxDomain box = BoxDomain::cube(2, -1, 1);
  RngStream r(1, 0);
  const Point x{0.3, -0.2};
  const StepResult s = step_restart(f, box, x, 0.0, state(1.0, 0.0, kInf, 1.0), r);
  EXPECT_EQ(s.position, x);
  EXPECT_EQ(s.regime, Regime::low);
}

TEST(StepRestart, QuadraticUnitStepLandsOnMinimizer) {
  const Objective f = diagonal_quadratic({1.0, 1.0});
  const BoxDomain box = BoxDomain::cube(2, -5, 5);
  RngStream r(1, 0);
  for (const Point& x : {Point{3.0, -4.0}, Point{0.1, 0.2}, Point{-5.0, 5.0}}) {
    const StepResult s = step_restart(f, box, x, f.value(x), state(1.0, 0.0, kInf, kInf), r);
    EXPECT_EQ(s.position, (Point{0.0, 0.0}));
  }
}

TEST(StepRestart, RestartBranchMeanIsBoxCenter) {
  const Objective f = zero_objective(2);
  const BoxDomain box({-20.0, 0.0}, {20.0, 5.0});
  RngStream r(2, 0);
  const int n = 100000;
  double m0 = 0, m1 = 0;
  for (int i = 0; i < n; ++i) {
    const StepResult s = step_restart(f, box, Point{1.0, 1.0}, 10.0, state(1.0, 0.1, kInf, 5.0), r);
    ASSERT_EQ(s.regime, Regime::restart);
    m0 += s.position[0];
    m1 += s.position[1];
  }
  EXPECT_NEAR(m0 / n, 0.0, 3 * 40.0 / std::sqrt(12.0 * n));
  EXPECT_NEAR(m1 / n, 2.5, 3 * 5.0 / std::sqrt(12.0 * n));
}

TEST(StepRestart, RestartBranchChiSquareUniform) {
  const Objective f = zero_objective(2);
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  RngStream r(3, 0);
  std::vector<std::size_t> cells(16, 0);
  for (int i = 0; i < 100000; ++i) {
    const StepResult s = step_restart(f, box, Point{0.0, 0.0}, 1.0, state(1.0, 0.1, kInf, 0.0), r);
    const auto ix = std::min<std::size_t>(3, static_cast<std::size_t>((s.position[0] + 20.0) / 10.0));
    const auto iy = std::min<std::size_t>(3, static_cast<std::size_t>((s.position[1] + 20.0) / 10.0));
    ++cells[ix * 4 + iy];
  }
  EXPECT_LT(chi2_uniform(cells), chi2_critical(15, 0.001));
}

TEST(StepTwoStage, EqualSigmasMatchClassicalStep) {
  const Objective f = rastrigin({1, 1, 0.05, 2});
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  RngStream a(4, 0), b(4, 0);
  Point xa{3.0, -7.0}, xb = xa;
  for (int i = 0; i < 1000; ++i) {
    const ScheduleState st = state(1.0, 0.7, 0.7, i % 2 ? -kInf : kInf);
    xa = step_two_stage(f, box, xa, f.value(xa), st, BoundaryPolicy::reflect, a).position;
    xb = step_classical(f, box, xb, st, BoundaryPolicy::reflect, b).position;
    ASSERT_EQ(xa, xb);
  }
}

TEST(StepTwoStage, HighRegimeCoversAllQuadrants) {
  const Objective f = rastrigin({1, 1, 0.05, 2});
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  RngStream r(5, 0);
  int q[4] = {0, 0, 0, 0};
  const Point x{10.0, 10.0};
  for (int i = 0; i < 10000; ++i) {
    const StepResult s = step_two_stage(f, box, x, f.value(x), state(1.0, 0.01, 20.0, 0.0), BoundaryPolicy::reflect, r);
    ASSERT_EQ(s.regime, Regime::high);
    ASSERT_TRUE(box.contains(s.position));
    ++q[(s.position[0] >= 0) * 2 + (s.position[1] >= 0)];
  }
  for (int k = 0; k < 4; ++k) EXPECT_GT(q[k], 0) << k;
}

TEST(StepTwoStage, InfiniteHighSigmaIsRestart) {
  const Objective f = rastrigin({1, 1, 0.05, 2});
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  RngStream a(6, 0), b(6, 0);
  const Point x{1.0, 2.0};
  const ScheduleState st = state(1.0, 0.1, kInf, 0.0);
  const StepResult s1 = step_two_stage(f, box, x, f.value(x), st, BoundaryPolicy::reflect, a);
  const StepResult s2 = step_restart(f, box, x, f.value(x), st, b);
  EXPECT_EQ(s1.position, s2.position);
  EXPECT_EQ(s1.regime, Regime::restart);
}

TEST(StepTwoStage, LowRegimeDisplacementCovariance) {
  const Objective f = zero_objective(2);
  const BoxDomain box = BoxDomain::cube(2, -1e6, 1e6);
  RngStream r(7, 0);
  const double sigma = 0.3;
  const int n = 100000;
  double s00 = 0, s11 = 0, s01 = 0;
  for (int i = 0; i < n; ++i) {
    const StepResult s =
        step_two_stage(f, box, Point{0.0, 0.0}, 0.0, state(1.0, sigma, 20.0, 1.0), BoundaryPolicy::none, r);
    s00 += s.position[0] * s.position[0];
    s11 += s.position[1] * s.position[1];
    s01 += s.position[0] * s.position[1];
  }
  const double v = sigma * sigma;
  EXPECT_NEAR(s00 / n, v, 0.02 * v);
  EXPECT_NEAR(s11 / n, v, 0.02 * v);
  EXPECT_NEAR(s01 / n, 0.0, 0.02 * v);
}

TEST(StepClassical, ZeroNoiseIsGradientDescent) {
  const Objective f = rastrigin({1, 1, 0.05, 2});
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  RngStream r(8, 0);
  const Point x{1.3, -0.6};
  const Point g = f.gradient(x);
  const StepResult s = step_classical(f, box, x, state(0.5, 0.0, 0.0, kInf), BoundaryPolicy::none, r);
  EXPECT_EQ(s.position, (Point{x[0] - 0.5 * g[0], x[1] - 0.5 * g[1]}));
}

TEST(BatchSize, Rules) {
  BatchConfig b;
  b.rule = BatchRule::proposed_linear;
  EXPECT_EQ(batch_size(b, 7), 7);
  b.rule = BatchRule::classical_log;
  EXPECT_EQ(batch_size(b, 10), 5);
  EXPECT_EQ(batch_size(b, 1), 3);
  b.rule = BatchRule::custom;
  EXPECT_THROW(batch_size(b, 1), std::invalid_argument);
  b.custom = [](std::size_t n) { return static_cast<long long>(2 * n); };
  EXPECT_EQ(batch_size(b, 4), 8);
}

TEST(StepBatch, ExactSamplingMatchesRestartStep) {
  const Objective f = rastrigin({1, 1, 0.05, 2});
  const BoxDomain box = BoxDomain::cube(2, -20, 20);
  for (double cutoff : {kInf, 0.0}) {
    RngStream a(9, 0), b(9, 0);
    const Point x{0.7, -0.2};
    ScheduleState st = state(1.0, 0.0, kInf, cutoff);
    st.strict = true;
    const StepResult s1 = step_batch(box, x, Sample{f.value(x), f.gradient(x)}, st, a);
    const StepResult s2 = step_restart(f, box, x, f.value(x), st, b);
    EXPECT_EQ(s1.position, s2.position);
    EXPECT_EQ(s1.regime, s2.regime);
  }
}

TEST(Solver, BatchSizeBelowOneIsClampedAndFlagged) {
  RastriginParams p{1, 1, 0.05, 2};
  SolverConfig cfg = practical_config(0.05, 3);
  cfg.variant = Variant::batch;
  cfg.batch.rule = BatchRule::custom;
  cfg.batch.custom = [](std::size_t) { return 0LL; };
  cfg.batch.sampler = [p](std::span<const double> x, std::size_t m, RngStream& r) {
    return batch_eval_grad(p, {}, x, m, r);
  };
  const RunTrace t = run(cfg, RngStream(1, 0));
  ASSERT_EQ(t.records.size(), 4u);
  for (std::size_t i = 1; i < t.records.size(); ++i) {
    EXPECT_TRUE(t.records[i].batch_clamped);
    EXPECT_EQ(t.records[i].batch_size, 1);
  }
}

TEST(StepGradientFree, PeriodicWrapAndScale) {
  const BoxDomain box = BoxDomain::cube(1, 0.0, 4.0);
  EXPECT_NEAR(box.wrap(0, 3.9 + 0.3), 0.2, 1e-12);
  RngStream r(10, 0);
  const GradientFreeConfig gf{BoxDomain({1.5}, {2.5}), 0.4};
  EXPECT_EQ(step_gradient_free(box, Point{2.0}, gf, r).sigma, 0.4);
  EXPECT_EQ(step_gradient_free(box, Point{3.0}, gf, r).sigma, 2.5);
  const GradientFreeConfig bad{BoxDomain({1.5}, {2.5}), 0.0};
  EXPECT_THROW(step_gradient_free(box, Point{2.0}, bad, r), std::invalid_argument);
}

// s = 1 gives a homogeneous periodic walk, whose stationary law is uniform.
// Thinning by 20 steps makes the retained samples close to independent.
TEST(StepGradientFree, UnitScaleHasUniformOccupancy) {
  const BoxDomain box = BoxDomain::cube(1, 0.0, 4.0);
  SolverConfig cfg{Variant::gradient_free, zero_objective(1), box, ClassicalSchedule{}, 1000000};
  cfg.gradient_free = GradientFreeConfig{BoxDomain({1.5}, {2.5}), 1.0};
  Solver solver(cfg, RngStream(11, 0));
  OccupationAccumulator all(box, 20), thinned(box, 20);
  for (std::size_t n = 1; n <= cfg.iterations; ++n) {
    const auto& rec = solver.step();
    all.add(rec.position);
    if (n % 20 == 0) thinned.add(rec.position);
  }
  EXPECT_LT(chi2_uniform(thinned.counts()), chi2_critical(19, 0.001));
  const OccupationHistogram h = all.histogram();
  for (double m : h.mass) EXPECT_NEAR(m, 0.05, 0.005);
}

TEST(Run, SingleIterationTraceHasTwoRecords) {
  const RunTrace t = run(practical_config(0.05, 1), RngStream(1, 0));
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.records[0].n, 0u);
  EXPECT_EQ(t.records[0].regime, Regime::initial);
  EXPECT_EQ(t.records[1].n, 1u);
}

TEST(Run, SameSeedIsBitwiseIdentical) {
  const SolverConfig cfg = practical_config(0.01, 2000);
  const RunTrace a = run(cfg, RngStream(123, 4));
  const RunTrace b = run(cfg, RngStream(123, 4));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_EQ(a.records[i].position, b.records[i].position);
    ASSERT_EQ(a.records[i].f_value, b.records[i].f_value);
    ASSERT_EQ(a.records[i].cutoff, b.records[i].cutoff);
  }
  const RunTrace c = run(cfg, RngStream(123, 5));
  EXPECT_NE(a.records.back().position, c.records.back().position);
  EXPECT_EQ(a.seed, 123u);
  EXPECT_EQ(a.stream, 4u);
}

TEST(Run, RecordInvariants) {
  for (Variant v : {Variant::restart, Variant::two_stage, Variant::classical}) {
    SolverConfig cfg = practical_config(0.05, 3000);
    cfg.variant = v;
    if (v == Variant::classical) cfg.schedule = ClassicalSchedule{};
    const RunTrace t = run(cfg, RngStream(77, 0));
    double best = kInf;
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      const auto& r = t.records[i];
      ASSERT_EQ(r.f_value, cfg.objective.value(r.position));
      // The restart form never reflects; an exit is resolved by the next restart.
      if (v != Variant::restart) {
        ASSERT_TRUE(cfg.box.contains(r.position));
      }
      best = std::min(best, r.f_value);
      if (i == 0 || v == Variant::classical) continue;
      const bool low = t.records[i - 1].f_value < r.cutoff;
      if (low) {
        ASSERT_EQ(r.regime, Regime::low);
      } else {
        ASSERT_TRUE(r.regime == Regime::high || r.regime == Regime::restart);
      }
      // Cutoff at step n is the median of f(X_0..X_{n-1}).
      std::vector<double> hist;
      if (i % 500 == 1) {
        for (std::size_t k = 0; k < i; ++k) hist.push_back(t.records[k].f_value);
        ASSERT_EQ(r.cutoff, update_cutoff(hist, 0.5));
      }
    }
    EXPECT_EQ(t.best.f_value, best);
  }
}

TEST(Run, BestSoFarIsRunningMinimum) {
  Solver s(practical_config(0.01, 1000), RngStream(5, 5));
  double prev = s.best().f_value;
  double min_seen = s.current().f_value;
  for (int i = 0; i < 1000; ++i) {
    const auto& r = s.step();
    min_seen = std::min(min_seen, r.f_value);
    ASSERT_LE(s.best().f_value, prev);
    ASSERT_EQ(s.best().f_value, min_seen);
    prev = s.best().f_value;
  }
}

// Cutoff +inf, no noise, eta < 2/b2: each coordinate contracts by exactly (1 - eta lambda_i).
TEST(Run, GeometricContractionOnQuadratic) {
  const Point lambda{0.5, 2.0};
  const double eta = 0.6;
  const Objective f = diagonal_quadratic(lambda);
  SolverConfig cfg{Variant::classical, f, BoxDomain::cube(2, -10, 10),
                   ClassicalSchedule{0.0, ClassicalDecay::inverse_sqrt_n, eta}, 60};
  cfg.initial = Point{7.0, -3.0};
  cfg.boundary = BoundaryPolicy::none;
  const RunTrace t = run(cfg, RngStream(1, 0));
  const double rho = std::max(std::abs(1 - eta * lambda[0]), std::abs(1 - eta * lambda[1]));
  const double r0 = norm(*cfg.initial);
  for (const auto& r : t.records) {
    const double n = static_cast<double>(r.n);
    ASSERT_LE(norm(r.position), std::pow(rho, n) * r0 * (1 + 1e-12));
    ASSERT_NEAR(r.position[0], 7.0 * std::pow(1 - eta * lambda[0], n), 1e-12);
    ASSERT_NEAR(r.position[1], -3.0 * std::pow(1 - eta * lambda[1], n), 1e-12);
  }
}

TEST(Run, StepFailureCarriesPartialTrace) {
  Objective f = diagonal_quadratic({1.0, 1.0});
  f.gradient = [](std::span<const double> x) {
    return x[0] > 100.0 ? Point{NAN, NAN} : Point{-1.0, 0.0};  // pushes +x until it blows up
  };
  SolverConfig cfg{Variant::classical, f, BoxDomain::cube(2, -1000, 1000), ClassicalSchedule{0.0}, 1000};
  cfg.initial = Point{0.0, 0.0};
  cfg.boundary = BoundaryPolicy::none;
  try {
    run(cfg, RngStream(1, 0));
    FAIL() << "expected RunError";
  } catch (const RunError& e) {
    EXPECT_EQ(e.partial().records.size(), 102u);
    EXPECT_EQ(e.partial().best.f_value, 0.0);
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg = practical_config(0.05, 10);
  cfg.initial = Point{30.0, 0.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.initial.reset();
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.iterations = 10;
  cfg.variant = Variant::gradient_free;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.variant = Variant::batch;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Boundary, Policies) {
  const BoxDomain box = BoxDomain::cube(2, 0.0, 1.0);
  RngStream r(1, 0);
  Point x{1.25, -0.5};
  apply_boundary(box, BoundaryPolicy::reflect, x, r);
  EXPECT_NEAR(x[0], 0.75, 1e-15);
  EXPECT_NEAR(x[1], 0.5, 1e-15);
  x = {1.25, -0.5};
  apply_boundary(box, BoundaryPolicy::clamp, x, r);
  EXPECT_EQ(x, (Point{1.0, 0.0}));
  x = {1.25, -0.5};
  apply_boundary(box, BoundaryPolicy::periodic, x, r);
  EXPECT_NEAR(x[0], 0.25, 1e-15);
  EXPECT_NEAR(x[1], 0.5, 1e-15);
  x = {1.25, -0.5};
  apply_boundary(box, BoundaryPolicy::resample, x, r);
  EXPECT_TRUE(box.contains(x));
  x = {1.25, -0.5};
  apply_boundary(box, BoundaryPolicy::none, x, r);
  EXPECT_EQ(x, (Point{1.25, -0.5}));
}
