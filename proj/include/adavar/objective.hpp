#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "adavar/domain.hpp"
#include "adavar/sampler.hpp"

namespace adavar {

// A deterministic objective with an analytic gradient.
struct Objective {
  std::size_t dim = 0;
  std::function<double(std::span<const double>)> value;
  std::function<Point(std::span<const double>)> gradient;
  std::optional<Point> minimizer;
  std::optional<double> min_value;
};

// Value/gradient pair from one (possibly averaged) stochastic evaluation.
struct Sample {
  double value = 0.0;
  Point gradient;
};

// J1(x) = a (d - sum cos(b x_i)) + c sum x_i^2
struct RastriginParams {
  double a = 1.0;
  double b = 1.0;
  double c = 0.01;
  std::size_t d = 2;

  void validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("rastrigin: a must be > 0");
    if (!(b > 0.0)) throw std::invalid_argument("rastrigin: b must be > 0");
    if (!(c >= 0.0)) throw std::invalid_argument("rastrigin: c must be >= 0");
    if (d < 1) throw std::invalid_argument("rastrigin: d must be >= 1");
  }
};

// Standard deviations of the two noise channels of J2. The default reads
// N(0, 0.5) as variance 0.5.
struct StochasticSampleParams {
  double sin_std = std::sqrt(0.5);
  double cos_std = std::sqrt(0.5);
  static constexpr double kFrequency = 10.0;

  static StochasticSampleParams from_std(double s) { return {s, s}; }
  static StochasticSampleParams from_variance(double v) { return from_std(std::sqrt(v)); }
};

namespace detail {
inline void check_dim(const RastriginParams& p, std::span<const double> x, const char* op) {
  if (x.size() != p.d) {
    throw std::invalid_argument(std::string(op) + ": expected dimension " + std::to_string(p.d) + ", got " +
                                std::to_string(x.size()));
  }
}
}  // namespace detail

inline double j1_eval(const RastriginParams& p, std::span<const double> x) {
  detail::check_dim(p, x, "j1_eval");
  double cos_sum = 0.0;
  double sq_sum = 0.0;
  for (double xi : x) {
    cos_sum += std::cos(p.b * xi);
    sq_sum += xi * xi;
  }
  return p.a * (static_cast<double>(p.d) - cos_sum) + p.c * sq_sum;
}

inline Point j1_grad(const RastriginParams& p, std::span<const double> x) {
  detail::check_dim(p, x, "j1_grad");
  Point g(p.d);
  for (std::size_t i = 0; i < p.d; ++i) g[i] = p.a * p.b * std::sin(p.b * x[i]) + 2.0 * p.c * x[i];
  return g;
}

inline Objective rastrigin(const RastriginParams& p) {
  p.validate();
  Objective f;
  f.dim = p.d;
  f.value = [p](std::span<const double> x) { return j1_eval(p, x); };
  f.gradient = [p](std::span<const double> x) { return j1_grad(p, x); };
  if (p.c > 0.0) {
    f.minimizer = Point(p.d, 0.0);
    f.min_value = 0.0;
  }
  return f;
}

// f(x) = 1/2 sum lambda_i (x_i - center_i)^2; a test and estimation workhorse.
inline Objective diagonal_quadratic(Point eigenvalues, Point center = {}) {
  if (center.empty()) center.assign(eigenvalues.size(), 0.0);
  if (center.size() != eigenvalues.size()) throw std::invalid_argument("diagonal_quadratic: dimension mismatch");
  Objective f;
  f.dim = eigenvalues.size();
  f.value = [eigenvalues, center](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += eigenvalues[i] * (x[i] - center[i]) * (x[i] - center[i]);
    return 0.5 * s;
  };
  f.gradient = [eigenvalues, center](std::span<const double> x) {
    Point g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = eigenvalues[i] * (x[i] - center[i]);
    return g;
  };
  f.minimizer = center;
  f.min_value = 0.0;
  return f;
}

// Identically zero; drives the gradient-free chain when no objective is given.
inline Objective zero_objective(std::size_t dim) {
  Objective f;
  f.dim = dim;
  f.value = [](std::span<const double>) { return 0.0; };
  f.gradient = [dim](std::span<const double>) { return Point(dim, 0.0); };
  return f;
}

// One draw of J2(x; zeta) = J1(x) + z1 sum sin(10 x_i) + z2 sum cos(10 x_i)
// together with its x-gradient under the same zeta.
inline Sample j2_sample(const RastriginParams& p, const StochasticSampleParams& s, std::span<const double> x,
                        RngStream& rng) {
  detail::check_dim(p, x, "j2_sample");
  constexpr double w = StochasticSampleParams::kFrequency;
  const double z1 = s.sin_std * rng.gaussian();
  const double z2 = s.cos_std * rng.gaussian();
  Sample out{j1_eval(p, x), j1_grad(p, x)};
  for (std::size_t i = 0; i < p.d; ++i) {
    const double sn = std::sin(w * x[i]);
    const double cs = std::cos(w * x[i]);
    out.value += z1 * sn + z2 * cs;
    out.gradient[i] += w * (z1 * cs - z2 * sn);
  }
  return out;
}

// Mean of M independent j2_sample draws. J2 is affine in zeta, so the x-only
// terms are computed once and only the zeta draws are accumulated; the draw
// sequence is the same as M successive j2_sample calls.
inline Sample batch_eval_grad(const RastriginParams& p, const StochasticSampleParams& s, std::span<const double> x,
                              std::size_t batch, RngStream& rng) {
  if (batch == 0) throw std::invalid_argument("batch_eval_grad: batch size must be >= 1");
  detail::check_dim(p, x, "batch_eval_grad");
  double z1_sum = 0.0;
  double z2_sum = 0.0;
  for (std::size_t k = 0; k < batch; ++k) {
    z1_sum += s.sin_std * rng.gaussian();
    z2_sum += s.cos_std * rng.gaussian();
  }
  const double z1 = z1_sum / static_cast<double>(batch);
  const double z2 = z2_sum / static_cast<double>(batch);
  constexpr double w = StochasticSampleParams::kFrequency;
  Sample out{j1_eval(p, x), j1_grad(p, x)};
  for (std::size_t i = 0; i < p.d; ++i) {
    const double sn = std::sin(w * x[i]);
    const double cs = std::cos(w * x[i]);
    out.value += z1 * sn + z2 * cs;
    out.gradient[i] += w * (z1 * cs - z2 * sn);
  }
  return out;
}

// Same law as batch_eval_grad in O(1) draws: the mean of M i.i.d. N(0, s^2)
// channels is N(0, s^2 / M). Used where M grows with the iteration count.
inline Sample batch_eval_grad_aggregated(const RastriginParams& p, const StochasticSampleParams& s,
                                         std::span<const double> x, std::size_t batch, RngStream& rng) {
  if (batch == 0) throw std::invalid_argument("batch_eval_grad_aggregated: batch size must be >= 1");
  detail::check_dim(p, x, "batch_eval_grad_aggregated");
  const double scale = 1.0 / std::sqrt(static_cast<double>(batch));
  const double z1 = s.sin_std * scale * rng.gaussian();
  const double z2 = s.cos_std * scale * rng.gaussian();
  constexpr double w = StochasticSampleParams::kFrequency;
  Sample out{j1_eval(p, x), j1_grad(p, x)};
  for (std::size_t i = 0; i < p.d; ++i) {
    const double sn = std::sin(w * x[i]);
    const double cs = std::cos(w * x[i]);
    out.value += z1 * sn + z2 * cs;
    out.gradient[i] += w * (z1 * cs - z2 * sn);
  }
  return out;
}

// Central differences, one axis at a time.
inline Point finite_diff_grad(const Objective& f, std::span<const double> x, double h = 1e-5) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Point xp(x.begin(), x.end());
  Point g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    const double fp = f.value(xp);
    xp[i] = xi - h;
    const double fm = f.value(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace adavar
