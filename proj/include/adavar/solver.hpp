#pragma once

// Single-trajectory driver for every algorithm variant.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adavar/domain.hpp"
#include "adavar/objective.hpp"
#include "adavar/sampler.hpp"
#include "adavar/schedule.hpp"

namespace adavar {

enum class Variant { restart, two_stage, classical, batch, gradient_free };

// Which noise regime produced a record. `initial` marks X_0.
enum class Regime { initial, low, high, restart };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::initial: return "initial";
    case Regime::low: return "low";
    case Regime::high: return "high";
    case Regime::restart: return "restart";
  }
  return "?";
}

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::restart: return "restart";
    case Variant::two_stage: return "two_stage";
    case Variant::classical: return "classical";
    case Variant::batch: return "batch";
    case Variant::gradient_free: return "gradient_free";
  }
  return "?";
}

enum class BatchRule { classical_log, proposed_linear, custom };

using BatchSampler = std::function<Sample(std::span<const double>, std::size_t, RngStream&)>;

struct BatchConfig {
  BatchRule rule = BatchRule::proposed_linear;
  std::function<long long(std::size_t)> custom;
  BatchSampler sampler;
};

// Batch size for step n. The logarithmic rule is ceil(ln(10 n)).
inline long long batch_size(const BatchConfig& b, std::size_t n) {
  switch (b.rule) {
    case BatchRule::proposed_linear:
      return static_cast<long long>(n);
    case BatchRule::classical_log:
      return static_cast<long long>(std::ceil(std::log(10.0 * static_cast<double>(n))));
    case BatchRule::custom:
      if (!b.custom) throw std::invalid_argument("batch_size: custom rule without a function");
      return b.custom(n);
  }
  return 1;
}

struct GradientFreeConfig {
  BoxDomain region;  // low-variance region
  double scale = 0.4;
};

struct SolverConfig {
  Variant variant = Variant::two_stage;
  Objective objective;
  BoxDomain box;
  Schedule schedule;
  std::size_t iterations = 1;
  std::optional<Point> initial;
  BoundaryPolicy boundary = BoundaryPolicy::reflect;
  BatchConfig batch;
  std::optional<GradientFreeConfig> gradient_free;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("SolverConfig: iterations must be >= 1");
    if (objective.dim != box.dim()) throw std::invalid_argument("SolverConfig: objective/box dimension mismatch");
    if (!objective.value) throw std::invalid_argument("SolverConfig: objective has no value function");
    if (variant != Variant::gradient_free && variant != Variant::batch && !objective.gradient) {
      throw std::invalid_argument("SolverConfig: objective has no gradient");
    }
    if (initial) {
      if (initial->size() != box.dim() || !all_finite(*initial) || !box.contains(*initial)) {
        throw std::invalid_argument("SolverConfig: initial point must lie inside the box");
      }
    }
    if (variant == Variant::batch && !batch.sampler) {
      throw std::invalid_argument("SolverConfig: batch variant needs a batch sampler");
    }
    if (variant == Variant::gradient_free) {
      if (!gradient_free) throw std::invalid_argument("SolverConfig: gradient_free variant needs region and scale");
      if (!(gradient_free->scale > 0.0)) throw std::invalid_argument("SolverConfig: gradient_free scale must be > 0");
      if (gradient_free->region.dim() != box.dim()) {
        throw std::invalid_argument("SolverConfig: gradient_free region dimension mismatch");
      }
    }
  }
};

struct IterateRecord {
  std::size_t n = 0;
  Point position;
  double f_value = 0.0;
  double sigma_used = 0.0;
  double cutoff = kInf;
  Regime regime = Regime::initial;
  long long batch_size = 0;  // batch variant only
  double f_estimate = std::numeric_limits<double>::quiet_NaN();  // batch variant only
  bool batch_clamped = false;
};

struct RunTrace {
  std::vector<IterateRecord> records;
  IterateRecord best;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// Raised when a step fails; carries everything recorded before the failure.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, RunTrace partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunTrace& partial() const { return partial_; }

 private:
  RunTrace partial_;
};

struct StepResult {
  Point position;
  Regime regime = Regime::low;
  double sigma = 0.0;
};

inline void apply_boundary(const BoxDomain& box, BoundaryPolicy policy, Point& x, RngStream& rng) {
  switch (policy) {
    case BoundaryPolicy::none:
      return;
    case BoundaryPolicy::reflect:
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = box.reflect(i, x[i]);
      return;
    case BoundaryPolicy::clamp:
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = box.clamp(i, x[i]);
      return;
    case BoundaryPolicy::periodic:
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = box.wrap(i, x[i]);
      return;
    case BoundaryPolicy::resample:
      if (!box.contains(x)) x = uniform_in_box(rng, box);
      return;
  }
}

namespace detail {
// x - eta g + sigma psi
inline Point noisy_gradient_step(std::span<const double> x, std::span<const double> g, double eta, double sigma,
                                 RngStream& rng) {
  Point out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += -eta * g[i] + sigma * rng.gaussian();
  return out;
}
}  // namespace detail

// Gradient step with noise sigma_n inside the sublevel set, uniform restart
// outside it.
inline StepResult step_restart(const Objective& f, const BoxDomain& box, std::span<const double> x, double fx,
                               const ScheduleState& st, RngStream& rng) {
  if (!st.low(fx)) return {uniform_in_box(rng, box), Regime::restart, kInf};
  const Point g = f.gradient(x);
  return {detail::noisy_gradient_step(x, g, st.eta, st.sigma_low, rng), Regime::low, st.sigma_low};
}

// Two-stage noise: sigma_low inside the sublevel set, sigma_high outside. An
// infinite sigma_high is the restart limit.
inline StepResult step_two_stage(const Objective& f, const BoxDomain& box, std::span<const double> x, double fx,
                                 const ScheduleState& st, BoundaryPolicy boundary, RngStream& rng) {
  const bool low = st.low(fx);
  const double sigma = low ? st.sigma_low : st.sigma_high;
  if (!std::isfinite(sigma)) return {uniform_in_box(rng, box), Regime::restart, kInf};
  const Point g = f.gradient(x);
  StepResult r{detail::noisy_gradient_step(x, g, st.eta, sigma, rng), low ? Regime::low : Regime::high, sigma};
  apply_boundary(box, boundary, r.position, rng);
  return r;
}

// State-independent noise.
inline StepResult step_classical(const Objective& f, const BoxDomain& box, std::span<const double> x,
                                 const ScheduleState& st, BoundaryPolicy boundary, RngStream& rng) {
  const Point g = f.gradient(x);
  StepResult r{detail::noisy_gradient_step(x, g, st.eta, st.sigma_low, rng), Regime::low, st.sigma_low};
  apply_boundary(box, boundary, r.position, rng);
  return r;
}

// Batch-averaged gradient step when the batch-mean value is below the cutoff,
// uniform restart otherwise. No additive noise: the batch carries it.
inline StepResult step_batch(const BoxDomain& box, std::span<const double> x, const Sample& estimate,
                             const ScheduleState& st, RngStream& rng) {
  if (!(estimate.value < st.cutoff)) return {uniform_in_box(rng, box), Regime::restart, kInf};
  Point out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= st.eta * estimate.gradient[i];
  return {std::move(out), Regime::low, 0.0};
}

// Pure diffusion with sigma = s inside the region and 1/s outside, wrapped
// periodically onto the box.
inline StepResult step_gradient_free(const BoxDomain& box, std::span<const double> x, const GradientFreeConfig& gf,
                                     RngStream& rng) {
  if (!(gf.scale > 0.0)) throw std::invalid_argument("step_gradient_free: scale must be > 0");
  const bool inside = gf.region.contains(x);
  const double sigma = inside ? gf.scale : 1.0 / gf.scale;
  StepResult r{Point(x.begin(), x.end()), inside ? Regime::low : Regime::high, sigma};
  for (std::size_t i = 0; i < r.position.size(); ++i) r.position[i] = box.wrap(i, r.position[i] + sigma * rng.gaussian());
  return r;
}

// Stepwise solver. Owns its stream, schedule state and best-so-far record.
class Solver {
 public:
  Solver(SolverConfig cfg, RngStream rng) : cfg_(std::move(cfg)), rng_(rng), driver_(cfg_.schedule) {
    cfg_.validate();
    current_.n = 0;
    current_.position = cfg_.initial ? *cfg_.initial : uniform_in_box(rng_, cfg_.box);
    current_.f_value = cfg_.objective.value(current_.position);
    current_.regime = Regime::initial;
    current_.sigma_used = 0.0;
    if (cfg_.variant != Variant::batch) driver_.observe(current_.f_value);
    best_ = current_;
  }

  const SolverConfig& config() const { return cfg_; }
  const IterateRecord& current() const { return current_; }
  const IterateRecord& best() const { return best_; }
  std::size_t iteration() const { return current_.n; }
  const RngStream& rng() const { return rng_; }

  const IterateRecord& step() {
    const std::size_t n = current_.n + 1;
    const Point& x = current_.position;
    IterateRecord next;
    next.n = n;

    if (cfg_.variant == Variant::batch) {
      long long m = batch_size(cfg_.batch, n);
      if (m < 1) {
        m = 1;
        next.batch_clamped = true;
      }
      const Sample est = cfg_.batch.sampler(x, static_cast<std::size_t>(m), rng_);
      driver_.observe(est.value);
      const ScheduleState st = driver_.at(n);
      StepResult r = step_batch(cfg_.box, x, est, st, rng_);
      next.position = std::move(r.position);
      next.regime = r.regime;
      next.sigma_used = r.sigma;
      next.cutoff = st.cutoff;
      next.batch_size = m;
      next.f_estimate = est.value;
    } else {
      const ScheduleState st = driver_.at(n);
      StepResult r;
      switch (cfg_.variant) {
        case Variant::restart:
          r = step_restart(cfg_.objective, cfg_.box, x, current_.f_value, st, rng_);
          break;
        case Variant::two_stage:
          r = step_two_stage(cfg_.objective, cfg_.box, x, current_.f_value, st, cfg_.boundary, rng_);
          break;
        case Variant::classical:
          r = step_classical(cfg_.objective, cfg_.box, x, st, cfg_.boundary, rng_);
          break;
        case Variant::gradient_free:
          r = step_gradient_free(cfg_.box, x, *cfg_.gradient_free, rng_);
          break;
        case Variant::batch:
          break;
      }
      next.position = std::move(r.position);
      next.regime = r.regime;
      next.sigma_used = r.sigma;
      next.cutoff = cfg_.variant == Variant::gradient_free ? kInf : st.cutoff;
    }

    if (!all_finite(next.position)) {
      throw std::runtime_error("step " + std::to_string(n) + ": iterate is not finite");
    }
    next.f_value = cfg_.objective.value(next.position);
    if (cfg_.variant != Variant::batch) driver_.observe(next.f_value);
    current_ = std::move(next);
    if (current_.f_value < best_.f_value) best_ = current_;
    return current_;
  }

 private:
  SolverConfig cfg_;
  RngStream rng_;
  ScheduleDriver driver_;
  IterateRecord current_;
  IterateRecord best_;
};

using RecordObserver = std::function<void(const IterateRecord&)>;

// Runs the configured number of steps and keeps every record (initial record
// included, so the trace has iterations + 1 entries).
inline RunTrace run(const SolverConfig& cfg, RngStream rng) {
  RunTrace trace;
  trace.seed = rng.seed();
  trace.stream = rng.stream();
  std::optional<Solver> solver;
  try {
    solver.emplace(cfg, rng);
  } catch (const std::exception& e) {
    throw RunError(std::string("run: initialisation failed: ") + e.what(), trace);
  }
  trace.records.reserve(cfg.iterations + 1);
  trace.records.push_back(solver->current());
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    try {
      trace.records.push_back(solver->step());
    } catch (const std::exception& e) {
      trace.best = solver->best();
      throw RunError(std::string("run: aborted after ") + std::to_string(trace.records.size() - 1) +
                         " steps: " + e.what(),
                     std::move(trace));
    }
  }
  trace.best = solver->best();
  return trace;
}

}  // namespace adavar
