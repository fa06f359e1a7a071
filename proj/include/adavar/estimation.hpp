#pragma once

// Sublevel-volume CDFs and curvature estimators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adavar/domain.hpp"
#include "adavar/objective.hpp"
#include "adavar/sampler.hpp"
#include "adavar/schedule.hpp"
#include "adavar/solver.hpp"

namespace adavar {

enum class Provenance { iid_uniform, high_variance_iterates };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::iid_uniform ? "iid_uniform" : "high_variance_iterates";
}

// Empirical distribution of objective values at (approximately) uniform
// points of the box. cdf(f) estimates |{x : f(x) <= f}| / |box|.
class EmpiricalCdf {
 public:
  EmpiricalCdf(std::vector<double> samples, Provenance provenance)
      : samples_(std::move(samples)), provenance_(provenance) {
    if (samples_.empty()) throw std::invalid_argument("EmpiricalCdf: no samples");
    for (double v : samples_) {
      if (std::isnan(v)) throw std::invalid_argument("EmpiricalCdf: NaN sample");
    }
    std::sort(samples_.begin(), samples_.end());
  }

  std::size_t size() const { return samples_.size(); }
  std::span<const double> samples() const { return samples_; }
  Provenance provenance() const { return provenance_; }
  double min() const { return samples_.front(); }
  double max() const { return samples_.back(); }

  // Fraction of samples <= f.
  double operator()(double f) const {
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), f);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
  }

  // Generalised inverse: smallest sample v with cdf(v) >= level.
  double inverse(double level) const {
    if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("inverse_cdf: level must lie in (0, 1]");
    const std::size_t n = samples_.size();
    const double nn = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(level * nn));
    k = std::clamp<std::size_t>(k, 1, n);
    // ceil(level * n) can be off by one in floating point; settle it against
    // the same k / n comparison operator() uses.
    while (k > 1 && static_cast<double>(k - 1) / nn >= level) --k;
    while (k < n && static_cast<double>(k) / nn < level) ++k;
    return samples_[k - 1];
  }

 private:
  std::vector<double> samples_;
  Provenance provenance_;
};

inline double inverse_cdf(const EmpiricalCdf& cdf, double level) { return cdf.inverse(level); }

// Objective values at N i.i.d. uniform points of the box.
inline EmpiricalCdf build_cdf_iid(const Objective& f, const BoxDomain& box, std::size_t samples, RngStream& rng) {
  if (samples < 1) throw std::invalid_argument("build_cdf_iid: need at least one sample");
  if (f.dim != box.dim()) throw std::invalid_argument("build_cdf_iid: objective/box dimension mismatch");
  std::vector<double> values;
  values.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) values.push_back(f.value(uniform_in_box(rng, box)));
  return EmpiricalCdf(std::move(values), Provenance::iid_uniform);
}

// A record is a high-variance iterate when its predecessor was in the high
// (or restart) regime, which is exactly the regime stored on the record.
inline bool is_high_variance(const IterateRecord& r) {
  return r.regime == Regime::high || r.regime == Regime::restart;
}

inline void append_high_variance_values(const RunTrace& trace, std::vector<double>& out) {
  for (const auto& r : trace.records) {
    if (is_high_variance(r)) out.push_back(r.f_value);
  }
}

inline EmpiricalCdf build_cdf_online(std::span<const RunTrace> traces) {
  std::vector<double> values;
  for (const auto& t : traces) append_high_variance_values(t, values);
  if (values.empty()) throw std::runtime_error("build_cdf_online: trace has no high-variance iterates");
  return EmpiricalCdf(std::move(values), Provenance::high_variance_iterates);
}

inline EmpiricalCdf build_cdf_online(const RunTrace& trace) { return build_cdf_online(std::span(&trace, 1)); }

// f_n = inverse_cdf(n^-alpha), n = 1..n_max, clamped non-increasing.
inline std::vector<double> cutoff_sequence(const EmpiricalCdf& cdf, double alpha, std::size_t n_max) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cutoff_sequence: alpha must be > 0");
  std::vector<double> out;
  out.reserve(n_max);
  double prev = kInf;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double level = std::pow(static_cast<double>(n), -alpha);
    prev = std::min(prev, cdf.inverse(level));
    out.push_back(prev);
  }
  return out;
}

// Cutoffs matching a prescribed volume schedule, level = min(1, volume / |box|).
inline std::vector<double> cutoffs_for_volumes(const EmpiricalCdf& cdf, double box_volume,
                                               const std::function<double(std::size_t)>& volume,
                                               std::size_t n_max) {
  std::vector<double> out;
  out.reserve(n_max);
  double prev = kInf;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double level = std::clamp(volume(n) / box_volume, 1.0 / static_cast<double>(cdf.size()), 1.0);
    prev = std::min(prev, cdf.inverse(level));
    out.push_back(prev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curvature

struct CurvatureEstimate {
  double b1 = 0.0;
  double b2 = 0.0;
  double f_star = 0.0;
  double diameter = 0.0;  // iterative estimator only
  std::size_t round = 0;  // iterative estimator only
  double alpha = 0.0;     // admissible volume-decay exponent implied by (b1, b2)
};

inline constexpr double kMinSeparation = 1e-12;

// |G(y) - G(x)| / |y - x|, or nothing when the points coincide.
inline std::optional<double> divided_difference(std::span<const double> x, std::span<const double> gx,
                                                std::span<const double> y, std::span<const double> gy) {
  const double dx = distance(x, y);
  if (dx < kMinSeparation) return std::nullopt;
  return distance(gx, gy) / dx;
}

// A sublevel value g and the (estimated) volume of {f <= g}.
struct LevelVolume {
  double level = 0.0;
  double volume = 0.0;
};

// Crude bounds from a sequence of points and gradients: b2 is the largest
// divided difference over consecutive pairs; b1 is the smallest
//   b2^(1-d) |Pi|^-2 (2 (g - f*) / c0^2)^d
// over the supplied levels with g > f*.
inline CurvatureEstimate estimate_bounds(std::span<const Point> points, std::span<const Point> gradients,
                                         std::span<const LevelVolume> levels, double f_star, double c0, int d) {
  if (points.size() != gradients.size()) throw std::invalid_argument("estimate_bounds: points/gradients mismatch");
  if (points.size() < 2) throw std::invalid_argument("estimate_bounds: need at least two points");
  if (d < 1 || !(c0 > 0.0)) throw std::invalid_argument("estimate_bounds: need d >= 1 and c0 > 0");

  double b2 = 0.0;
  bool any_pair = false;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (auto dd = divided_difference(points[i], gradients[i], points[i + 1], gradients[i + 1])) {
      b2 = std::max(b2, *dd);
      any_pair = true;
    }
  }
  if (!any_pair) throw std::runtime_error("estimate_bounds: all consecutive points coincide");
  if (!(b2 > 0.0)) throw std::runtime_error("estimate_bounds: gradient is constant along the sequence");

  double b1 = kInf;
  for (const auto& lv : levels) {
    if (!(lv.level > f_star) || !(lv.volume > 0.0)) continue;
    const double e = std::pow(b2, 1.0 - d) / (lv.volume * lv.volume) *
                     std::pow(2.0 * (lv.level - f_star) / (c0 * c0), static_cast<double>(d));
    b1 = std::min(b1, e);
  }
  if (!std::isfinite(b1)) throw std::runtime_error("estimate_bounds: no level above the minimum estimate");

  CurvatureEstimate out;
  out.b1 = b1;
  out.b2 = b2;
  out.f_star = f_star;
  return out;
}

struct CurvatureSample {
  Point x;
  double f = 0.0;
  Point gradient;
};

// Produces the next sample, or nothing when the stream is exhausted.
using CurvatureSampleSource = std::function<std::optional<CurvatureSample>()>;
// g_j for j >= 1, decreasing towards the minimum value.
using LevelSequence = std::function<double(std::size_t)>;

// Thrown when the sample stream runs dry mid-round; keeps finished rounds.
class PartialEstimateError : public std::runtime_error {
 public:
  PartialEstimateError(const std::string& what, std::vector<CurvatureEstimate> rounds)
      : std::runtime_error(what), rounds_(std::move(rounds)) {}
  const std::vector<CurvatureEstimate>& rounds() const { return rounds_; }

 private:
  std::vector<CurvatureEstimate> rounds_;
};

// Offset of the first level used by round l: m l (l - 1) / 2.
inline std::size_t round_offset(std::size_t m, std::size_t l) { return m * l * (l - 1) / 2; }

// g_j = floor + (start - floor) * rho^(j-1) with rho = 2^(-1/m): the level
// gap halves every m indices, so round l sits l(l-1)/2 halvings down.
inline LevelSequence geometric_levels(double start, double floor, std::size_t m) {
  const double rho = std::pow(0.5, 1.0 / static_cast<double>(std::max<std::size_t>(m, 1)));
  return [=](std::size_t j) { return floor + (start - floor) * std::pow(rho, static_cast<double>(j - 1)); };
}

// Iterative b1/b2 estimation. Round l keeps the first m*l samples below
// g_{1+k_l} and updates
//   b2 = max |G(Y_s) - G(Y_{s-1})| / |Y_s - Y_{s-1}|,
//   D  = max |Y_s - Y_{s-1}|,   f* = running min of f(Y),
//   b1 = 8 |g_{1+k_l} - f*| / D^2,
// over consecutive kept samples. b1 is capped at b2, and alpha is the
// critical exponent for step size eta (1/b2 when not given).
inline std::vector<CurvatureEstimate> estimate_b1b2_iterative(const CurvatureSampleSource& next,
                                                              const LevelSequence& levels, std::size_t m,
                                                              std::size_t rounds,
                                                              std::optional<double> eta = std::nullopt) {
  if (m < 2) throw std::invalid_argument("estimate_b1b2_iterative: m must be >= 2");
  if (rounds < 1) throw std::invalid_argument("estimate_b1b2_iterative: need at least one round");

  std::vector<CurvatureEstimate> out;
  std::optional<CurvatureSample> pending = next();
  if (!pending) throw PartialEstimateError("estimate_b1b2_iterative: empty sample stream", out);
  double f_star = pending->f;

  for (std::size_t l = 1; l <= rounds; ++l) {
    const std::size_t k = round_offset(m, l);
    const double threshold = levels(1 + k);
    double b2 = 0.0;
    double diameter = 0.0;
    std::size_t kept = 0;
    std::optional<CurvatureSample> prev;
    while (kept < m * l) {
      std::optional<CurvatureSample> s = pending ? std::move(pending) : next();
      pending.reset();
      if (!s) {
        throw PartialEstimateError("estimate_b1b2_iterative: sample stream exhausted in round " + std::to_string(l),
                                   out);
      }
      if (!(s->f < threshold)) continue;
      ++kept;
      f_star = std::min(f_star, s->f);
      if (prev) {
        if (auto dd = divided_difference(prev->x, prev->gradient, s->x, s->gradient)) {
          b2 = std::max(b2, *dd);
          diameter = std::max(diameter, distance(prev->x, s->x));
        }
      }
      prev = std::move(s);
    }
    if (!(diameter > 0.0) || !(b2 > 0.0)) {
      throw PartialEstimateError("estimate_b1b2_iterative: degenerate round " + std::to_string(l), out);
    }
    CurvatureEstimate est;
    est.round = l;
    est.b2 = b2;
    est.f_star = f_star;
    est.diameter = diameter;
    est.b1 = std::min(8.0 * std::abs(threshold - f_star) / (diameter * diameter), b2);
    if (est.b1 > 0.0) {
      const double step = eta.value_or(1.0 / b2);
      est.alpha = critical_constants({est.b1, b2}, step).alpha_star;
    }
    out.push_back(est);
  }
  return out;
}

// Uniform samples of the box with objective values and gradients.
inline CurvatureSampleSource uniform_sample_source(const Objective& f, const BoxDomain& box, RngStream& rng,
                                                   std::size_t limit) {
  auto count = std::make_shared<std::size_t>(0);
  return [&f, &box, &rng, limit, count]() -> std::optional<CurvatureSample> {
    if (*count >= limit) return std::nullopt;
    ++*count;
    CurvatureSample s;
    s.x = uniform_in_box(rng, box);
    s.f = f.value(s.x);
    s.gradient = f.gradient(s.x);
    return s;
  };
}

}  // namespace adavar
