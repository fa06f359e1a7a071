#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "adavar/estimation.hpp"

using namespace adavar;

namespace {

Objective identity_1d() {
  Objective f;
  f.dim = 1;
  f.value = [](std::span<const double> x) { return x[0]; };
  f.gradient = [](std::span<const double>) { return Point{1.0}; };
  return f;
}

// Area of {|x| <= r} inside [-1,1]^2, for 1 <= r <= sqrt 2.
double clipped_disc_area(double r) {
  return std::numbers::pi * r * r - 4.0 * (r * r * std::acos(1.0 / r) - std::sqrt(r * r - 1.0));
}

// f = |x|^2 on [-1,1]^2: the level-p quantile solves area(sqrt v) / 4 = p.
double square_norm_quantile(double p) {
  double lo = 1.0, hi = std::sqrt(2.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (clipped_disc_area(mid) / 4.0 < p ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  return r * r;
}

}  // namespace

TEST(EmpiricalCdf, UniformIdentityOracle) {
  RngStream r(1, 0);
  const EmpiricalCdf cdf = build_cdf_iid(identity_1d(), BoxDomain::cube(1, 0, 1), 1000000, r);
  EXPECT_EQ(cdf.provenance(), Provenance::iid_uniform);
  EXPECT_EQ(cdf.size(), 1000000u);
  EXPECT_NEAR(cdf(0.5), 0.5, 0.0015);
  EXPECT_NEAR(cdf.inverse(0.25), 0.25, 0.0013);
  EXPECT_EQ(cdf(-0.1), 0.0);
  EXPECT_EQ(cdf(cdf.max()), 1.0);
  EXPECT_EQ(cdf(2.0), 1.0);
  EXPECT_EQ(cdf.inverse(1.0), cdf.max());
}

TEST(EmpiricalCdf, Errors) {
  EXPECT_THROW(EmpiricalCdf({}, Provenance::iid_uniform), std::invalid_argument);
  EXPECT_THROW(EmpiricalCdf({1.0, NAN}, Provenance::iid_uniform), std::invalid_argument);
  const EmpiricalCdf cdf({3.0, 1.0, 2.0}, Provenance::iid_uniform);
  EXPECT_THROW(cdf.inverse(0.0), std::invalid_argument);
  EXPECT_THROW(cdf.inverse(1.5), std::invalid_argument);
  EXPECT_THROW(cdf.inverse(NAN), std::invalid_argument);
  RngStream r(1, 0);
  EXPECT_THROW(build_cdf_iid(identity_1d(), BoxDomain::cube(1, 0, 1), 0, r), std::invalid_argument);
}

TEST(EmpiricalCdf, StepFunctionAndGeneralizedInverse) {
  const EmpiricalCdf cdf({3.0, 1.0, 2.0, 2.0}, Provenance::iid_uniform);
  EXPECT_EQ(cdf(0.5), 0.0);
  EXPECT_EQ(cdf(1.0), 0.25);
  EXPECT_EQ(cdf(1.999), 0.25);
  EXPECT_EQ(cdf(2.0), 0.75);
  EXPECT_EQ(cdf(3.0), 1.0);
  EXPECT_EQ(cdf.inverse(0.25), 1.0);
  EXPECT_EQ(cdf.inverse(0.26), 2.0);
  EXPECT_EQ(cdf.inverse(0.75), 2.0);
  EXPECT_EQ(cdf.inverse(0.7500001), 3.0);
  EXPECT_EQ(cdf.inverse(1e-9), 1.0);
}

TEST(EmpiricalCdf, MonotoneAndInverseConsistent) {
  RngStream r(2, 0);
  std::vector<double> v;
  for (int i = 0; i < 2000; ++i) v.push_back(std::floor(r.gaussian() * 20.0) / 7.0);
  const EmpiricalCdf cdf(v, Provenance::iid_uniform);
  double prev = 0.0;
  for (double f = -20.0; f <= 20.0; f += 0.01) {
    const double c = cdf(f);
    ASSERT_GE(c, prev);
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, 1.0);
    prev = c;
  }
  for (double s : cdf.samples()) {
    ASSERT_LE(cdf.inverse(cdf(s)), s);
    ASSERT_EQ(cdf.inverse(cdf(s)), s);  // s is itself a sample
  }
  for (int k = 1; k <= 2000; ++k) {
    const double level = k / 2000.0;
    const double q = cdf.inverse(level);
    ASSERT_GE(cdf(q), level);
    // Nothing strictly below q reaches the level.
    ASSERT_LT(cdf(std::nextafter(q, -INFINITY)), level);
  }
}

TEST(EmpiricalCdf, MonteCarloErrorWithinThreeSigma) {
  const std::size_t n = 10000;
  const int reps = 200;
  int inside = 0;
  for (int k = 0; k < reps; ++k) {
    RngStream r = derive_stream(55, k);
    const EmpiricalCdf cdf = build_cdf_iid(identity_1d(), BoxDomain::cube(1, 0, 1), n, r);
    inside += std::abs(cdf(0.5) - 0.5) <= 1.5 / std::sqrt(static_cast<double>(n));
  }
  EXPECT_GE(inside, static_cast<int>(0.98 * reps));
}

TEST(EmpiricalCdf, QuantileConvergesToSublevelAreaOracle) {
  // Level 0.9 needs area 3.6 > pi, so the disc is clipped by the box.
  const double exact = square_norm_quantile(0.9);
  EXPECT_NEAR(clipped_disc_area(std::sqrt(exact)), 3.6, 1e-12);
  const Objective f = diagonal_quadratic({2.0, 2.0});  // |x|^2
  const BoxDomain box = BoxDomain::cube(2, -1, 1);
  std::vector<double> err;
  for (std::size_t n : {1000u, 4000u, 16000u, 64000u}) {
    double e = 0.0;
    const int reps = 60;
    for (int k = 0; k < reps; ++k) {
      RngStream r = derive_stream(n, k);
      e += std::abs(build_cdf_iid(f, box, n, r).inverse(0.9) - exact);
    }
    err.push_back(e / reps);
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 1] * 0.75) << i;
  EXPECT_GT(err.front() / err.back(), 5.0);
}

TEST(BuildCdfOnline, CollectsHighVarianceIterates) {
  RunTrace t;
  for (int i = 0; i < 6; ++i) {
    IterateRecord r;
    r.n = i;
    r.f_value = i;
    r.regime = i == 0 ? Regime::initial : (i % 2 ? Regime::high : Regime::low);
    t.records.push_back(r);
  }
  t.records[4].regime = Regime::restart;
  const EmpiricalCdf cdf = build_cdf_online(t);
  EXPECT_EQ(cdf.provenance(), Provenance::high_variance_iterates);
  EXPECT_EQ(std::vector<double>(cdf.samples().begin(), cdf.samples().end()), (std::vector<double>{1, 3, 4, 5}));

  for (auto& r : t.records) r.regime = Regime::low;
  EXPECT_THROW(build_cdf_online(t), std::runtime_error);
}

TEST(CutoffSequence, Examples) {
  const EmpiricalCdf cdf({5, 1, 4, 2, 3, 6, 8, 7}, Provenance::iid_uniform);
  const auto seq = cutoff_sequence(cdf, 0.5, 10);
  ASSERT_EQ(seq.size(), 10u);
  EXPECT_EQ(seq[0], cdf.max());
  EXPECT_EQ(seq[3], cdf.inverse(0.5));
  EXPECT_THROW(cutoff_sequence(cdf, 0.0, 5), std::invalid_argument);
}

TEST(CutoffSequence, NonIncreasingForAnyInput) {
  RngStream r(8, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v;
    const int n = 1 + static_cast<int>(r.uniform() * 500);
    for (int i = 0; i < n; ++i) v.push_back(r.gaussian());
    const EmpiricalCdf cdf(v, Provenance::iid_uniform);
    const double alpha = 0.01 + 3.0 * r.uniform();
    const auto seq = cutoff_sequence(cdf, alpha, 300);
    for (std::size_t i = 1; i < seq.size(); ++i) ASSERT_LE(seq[i], seq[i - 1]);
  }
}

TEST(CutoffsForVolumes, MatchesVolumeFraction) {
  RngStream r(1, 0);
  const BoxDomain box = BoxDomain::cube(1, 0, 1);
  const EmpiricalCdf cdf = build_cdf_iid(identity_1d(), box, 100000, r);
  const auto seq = cutoffs_for_volumes(cdf, 1.0, [](std::size_t n) { return 1.0 / static_cast<double>(n); }, 100);
  EXPECT_EQ(seq[0], cdf.max());
  EXPECT_NEAR(seq[9], 0.1, 0.005);
  EXPECT_NEAR(seq[99], 0.01, 0.002);
}

TEST(DividedDifference, SkipsCoincidentPoints) {
  EXPECT_FALSE(divided_difference(Point{1.0}, Point{0.0}, Point{1.0}, Point{5.0}).has_value());
  EXPECT_NEAR(*divided_difference(Point{0.0, 0.0}, Point{0.0, 0.0}, Point{3.0, 4.0}, Point{6.0, 8.0}), 2.0, 1e-15);
}

TEST(EstimateBounds, OneDimensionalQuadraticIsExact) {
  const double lambda = 2.7;
  const Objective f = diagonal_quadratic({lambda});
  RngStream r(3, 0);
  std::vector<Point> xs, gs;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(Point{r.uniform(-3, 3)});
    gs.push_back(f.gradient(xs.back()));
  }
  std::vector<LevelVolume> levels;
  for (double g : {0.1, 0.5, 2.0}) levels.push_back({g, 2.0 * std::sqrt(2.0 * g / lambda)});
  const CurvatureEstimate e = estimate_bounds(xs, gs, levels, 0.0, 0.5, 1);
  EXPECT_NEAR(e.b2, lambda, 1e-12 * lambda);
  EXPECT_NEAR(e.b1, lambda, 1e-12 * lambda);
  EXPECT_LE(e.b1, e.b2 * (1 + 1e-12));
}

// Hessian diag(1, 4): divided differences lie in [1, 4], and with exact
// ellipse areas the b1 expression equals 4 / b2.
TEST(EstimateBounds, TwoDimensionalEigenvalueBracketing) {
  const Objective f = diagonal_quadratic({1.0, 4.0});
  RngStream r(4, 0);
  std::vector<Point> xs, gs;
  for (int i = 0; i <= 10000; ++i) {
    Point x;
    do {
      x = {r.uniform(-1, 1), r.uniform(-1, 1)};
    } while (norm(x) > 1.0);
    xs.push_back(x);
    gs.push_back(f.gradient(x));
  }
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double dd = *divided_difference(xs[i], gs[i], xs[i + 1], gs[i + 1]);
    ASSERT_GE(dd, 1.0 - 1e-12);
    ASSERT_LE(dd, 4.0 + 1e-12);
  }
  std::vector<LevelVolume> levels;
  for (double g : {0.05, 0.2, 0.8}) levels.push_back({g, std::numbers::pi * 2.0 * g / 2.0});
  const CurvatureEstimate e = estimate_bounds(xs, gs, levels, 0.0, unit_ball_radius(2), 2);
  EXPECT_GE(e.b2, 3.6);
  EXPECT_LE(e.b2, 4.0);
  EXPECT_NEAR(e.b1, 1.0, 0.1);
  EXPECT_NEAR(e.b1, 4.0 / e.b2, 1e-9);
  EXPECT_LE(e.b1, e.b2);
}

TEST(EstimateBounds, VolumesFromMonteCarloCdf) {
  const double lambda = 1.5;
  const Objective f = diagonal_quadratic({lambda});
  const BoxDomain box = BoxDomain::cube(1, -2, 2);
  RngStream r(6, 0);
  const EmpiricalCdf cdf = build_cdf_iid(f, box, 400000, r);
  std::vector<Point> xs, gs;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(uniform_in_box(r, box));
    gs.push_back(f.gradient(xs.back()));
  }
  std::vector<LevelVolume> levels;
  for (double g : {0.3, 1.0}) levels.push_back({g, cdf(g) * box.volume()});
  const CurvatureEstimate e = estimate_bounds(xs, gs, levels, 0.0, 0.5, 1);
  EXPECT_NEAR(e.b1, lambda, 0.02 * lambda);
}

TEST(EstimateBounds, Errors) {
  const std::vector<Point> same{Point{1.0}, Point{1.0}, Point{1.0}};
  const std::vector<Point> g{Point{0.0}, Point{0.0}, Point{0.0}};
  const std::vector<LevelVolume> lv{{1.0, 1.0}};
  EXPECT_THROW(estimate_bounds(same, g, lv, 0.0, 0.5, 1), std::runtime_error);
  EXPECT_THROW(estimate_bounds(std::vector<Point>{Point{1.0}}, std::vector<Point>{Point{1.0}}, lv, 0.0, 0.5, 1),
               std::invalid_argument);
  const std::vector<Point> xs{Point{0.0}, Point{1.0}};
  const std::vector<Point> gs{Point{0.0}, Point{1.0}};
  EXPECT_THROW(estimate_bounds(xs, gs, std::vector<LevelVolume>{{-1.0, 1.0}}, 0.0, 0.5, 1), std::runtime_error);
  EXPECT_THROW(estimate_bounds(xs, g, lv, 0.0, 0.5, 1), std::invalid_argument);
}

TEST(IterativeEstimate, RoundOffsets) {
  EXPECT_EQ(round_offset(4, 1), 0u);
  EXPECT_EQ(round_offset(4, 2), 4u);
  EXPECT_EQ(round_offset(4, 3), 12u);
  EXPECT_EQ(round_offset(50, 3), 150u);
}

TEST(IterativeEstimate, OneDimensionalQuadratic) {
  const double lambda = 3.0;
  const Objective f = diagonal_quadratic({lambda});
  const BoxDomain box = BoxDomain::cube(1, -2, 2);
  RngStream r(12, 0);
  const auto src = uniform_sample_source(f, box, r, 1000000);
  const auto rounds = estimate_b1b2_iterative(src, geometric_levels(1.0, 0.0, 50), 50, 3);
  ASSERT_EQ(rounds.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& e = rounds[l];
    EXPECT_EQ(e.round, l + 1);
    EXPECT_NEAR(e.b2, lambda, 0.05 * lambda);
    EXPECT_GT(e.b1, 0.0);
    EXPECT_LE(e.b1, e.b2);
    EXPECT_GE(e.f_star, 0.0);
    EXPECT_GT(e.diameter, 0.0);
    EXPECT_NEAR(e.alpha, critical_constants({e.b1, e.b2}, 1.0 / e.b2).alpha_star, 1e-15);
    if (l > 0) {
      EXPECT_LE(e.f_star, rounds[l - 1].f_star);
    }
  }
}

TEST(IterativeEstimate, UsesSquaredDiameter) {
  // Hand-fed samples: round 1 (m = 2, threshold g_1 = 10) keeps the first two.
  std::vector<CurvatureSample> s{{Point{0.0}, 1.0, Point{0.0}}, {Point{2.0}, 3.0, Point{40.0}}};
  std::size_t i = 0;
  const CurvatureSampleSource src = [&]() -> std::optional<CurvatureSample> {
    if (i >= s.size()) return std::nullopt;
    return s[i++];
  };
  const auto rounds = estimate_b1b2_iterative(src, [](std::size_t) { return 10.0; }, 2, 1);
  ASSERT_EQ(rounds.size(), 1u);
  EXPECT_EQ(rounds[0].b2, 20.0);
  EXPECT_EQ(rounds[0].diameter, 2.0);
  EXPECT_EQ(rounds[0].f_star, 1.0);
  EXPECT_EQ(rounds[0].b1, 18.0);  // 8 |10 - 1| / 2^2
}

TEST(IterativeEstimate, LevelsBelowMinimumGivePartialError) {
  const Objective f = diagonal_quadratic({1.0});
  const BoxDomain box = BoxDomain::cube(1, -1, 1);
  RngStream r(1, 0);
  const auto src = uniform_sample_source(f, box, r, 10000);
  try {
    estimate_b1b2_iterative(src, [](std::size_t) { return -1.0; }, 4, 2);
    FAIL() << "expected PartialEstimateError";
  } catch (const PartialEstimateError& e) {
    EXPECT_TRUE(e.rounds().empty());
  }
}

TEST(IterativeEstimate, ExhaustionKeepsCompletedRounds) {
  const Objective f = diagonal_quadratic({1.0});
  const BoxDomain box = BoxDomain::cube(1, -1, 1);
  RngStream r(1, 0);
  // Level 1 accepts every sample: round 1 needs 4 samples, round 2 needs 8 more.
  const auto src = uniform_sample_source(f, box, r, 8);
  try {
    estimate_b1b2_iterative(src, [](std::size_t) { return 1.0; }, 4, 2);
    FAIL() << "expected PartialEstimateError";
  } catch (const PartialEstimateError& e) {
    ASSERT_EQ(e.rounds().size(), 1u);
    EXPECT_EQ(e.rounds()[0].round, 1u);
  }
  RngStream r2(1, 0);
  EXPECT_THROW(estimate_b1b2_iterative(uniform_sample_source(f, box, r2, 100), geometric_levels(1, 0, 1), 1, 1),
               std::invalid_argument);
}

TEST(GeometricLevels, HalvesEveryMIndices) {
  const auto g = geometric_levels(9.0, 1.0, 4);
  EXPECT_DOUBLE_EQ(g(1), 9.0);
  EXPECT_NEAR(g(5), 5.0, 1e-12);
  EXPECT_NEAR(g(9), 3.0, 1e-12);
  for (std::size_t j = 1; j < 100; ++j) ASSERT_LT(g(j + 1), g(j));
}
