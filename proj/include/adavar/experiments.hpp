#pragma once

// Multi-run convergence curves and occupation histograms.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "adavar/domain.hpp"
#include "adavar/sampler.hpp"
#include "adavar/solver.hpp"

namespace adavar {

// {1, 2, 5} x 10^j up to and including n_max, plus n_max itself.
inline std::vector<std::size_t> default_checkpoints(std::size_t n_max) {
  std::vector<std::size_t> out;
  for (std::size_t p = 1; p <= n_max; p *= 10) {
    for (std::size_t m : {1, 2, 5}) {
      if (m * p <= n_max) out.push_back(m * p);
    }
    if (p > n_max / 10) break;
  }
  if (out.empty() || out.back() != n_max) out.push_back(n_max);
  return out;
}

struct ExperimentConfig {
  SolverConfig solver;
  std::size_t runs = 1;
  double eps = 0.01;
  std::vector<std::size_t> checkpoints;  // empty: default grid
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // 0: hardware concurrency

  std::vector<std::size_t> effective_checkpoints() const {
    return checkpoints.empty() ? default_checkpoints(solver.iterations) : checkpoints;
  }

  void validate() const {
    solver.validate();
    if (runs < 1) throw std::invalid_argument("ExperimentConfig: runs must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("ExperimentConfig: eps must be > 0");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (checkpoints[i] > solver.iterations) {
        throw std::invalid_argument("ExperimentConfig: checkpoint beyond the iteration count");
      }
      if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
        throw std::invalid_argument("ExperimentConfig: checkpoints must be strictly ascending");
      }
    }
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  if (successes > trials) throw std::invalid_argument("wilson_interval: successes > trials");
  const double k = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / k;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / k;
  const double center = (p + z2 / (2.0 * k)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / k + z2 / (4.0 * k * k));
  return {std::max(0.0, std::min(p, center - half)), std::min(1.0, std::max(p, center + half))};
}

struct ConvergenceCurve {
  std::vector<std::size_t> checkpoints;
  std::vector<double> failure_fraction;
  std::vector<double> wilson_lo;
  std::vector<double> wilson_hi;
  std::size_t runs = 0;

  double success_at(std::size_t i) const { return 1.0 - failure_fraction.at(i); }
  double final_success() const { return failure_fraction.empty() ? 0.0 : 1.0 - failure_fraction.back(); }
};

// Per-run distances to the minimiser at each checkpoint; rows are runs.
struct RunDistances {
  std::vector<std::vector<double>> current;
  std::vector<std::vector<double>> best;
};

struct ConvergenceResult {
  ConvergenceCurve current;  // |X_n - x*| >= eps
  ConvergenceCurve best;     // same for the best-so-far iterate
  RunDistances distances;
};

// Calls fn(k) for k in [0, count) on up to `jobs` threads. The first
// exception thrown by any call is rethrown after all workers stop.
inline void parallel_for_runs(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count || failed.load()) return;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline ConvergenceCurve failure_curve(const std::vector<std::size_t>& checkpoints,
                                      const std::vector<std::vector<double>>& distances, double eps) {
  ConvergenceCurve c;
  c.checkpoints = checkpoints;
  c.runs = distances.size();
  if (c.runs == 0) throw std::invalid_argument("failure_curve: no runs");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    std::size_t failures = 0;
    for (const auto& row : distances) failures += row.at(i) >= eps ? 1 : 0;
    const Interval w = wilson_interval(failures, c.runs);
    c.failure_fraction.push_back(static_cast<double>(failures) / static_cast<double>(c.runs));
    c.wilson_lo.push_back(w.lo);
    c.wilson_hi.push_back(w.hi);
  }
  return c;
}

// One run, sampled at the checkpoints without keeping the full trace.
inline void checkpoint_distances(const SolverConfig& cfg, RngStream rng, const Point& target,
                                 const std::vector<std::size_t>& checkpoints, std::vector<double>& current,
                                 std::vector<double>& best) {
  Solver solver(cfg, rng);
  current.assign(checkpoints.size(), 0.0);
  best.assign(checkpoints.size(), 0.0);
  std::size_t i = 0;
  for (std::size_t n = 0; n <= cfg.iterations && i < checkpoints.size(); ++n) {
    if (n > 0) solver.step();
    while (i < checkpoints.size() && checkpoints[i] == n) {
      current[i] = distance(solver.current().position, target);
      best[i] = distance(solver.best().position, target);
      ++i;
    }
  }
}

// K independent runs on streams derive_stream(seed, k). Results are stored by
// run index, so the output does not depend on the worker count.
inline ConvergenceResult convergence_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.solver.objective.minimizer) {
    throw std::invalid_argument("convergence_experiment: objective has no known minimizer");
  }
  const Point target = *cfg.solver.objective.minimizer;
  const auto checkpoints = cfg.effective_checkpoints();

  ConvergenceResult out;
  out.distances.current.resize(cfg.runs);
  out.distances.best.resize(cfg.runs);
  parallel_for_runs(cfg.runs, cfg.jobs, [&](std::size_t k) {
    checkpoint_distances(cfg.solver, derive_stream(cfg.seed, k), target, checkpoints, out.distances.current[k],
                         out.distances.best[k]);
  });
  out.current = failure_curve(checkpoints, out.distances.current, cfg.eps);
  out.best = failure_curve(checkpoints, out.distances.best, cfg.eps);
  return out;
}

// ---------------------------------------------------------------------------
// Occupation measure

struct OccupationHistogram {
  std::vector<double> edges;  // bins + 1
  std::vector<double> mass;

  std::size_t bins() const { return mass.size(); }
  double bin_lo(std::size_t i) const { return edges[i]; }
  double bin_hi(std::size_t i) const { return edges[i + 1]; }
};

// Equal-width bin counts along one axis of the box.
class OccupationAccumulator {
 public:
  OccupationAccumulator(const BoxDomain& box, std::size_t bins, std::size_t axis = 0)
      : lo_(0.0), hi_(0.0), axis_(axis), counts_(bins, 0) {
    if (bins < 1) throw std::invalid_argument("occupation_measure: bins must be >= 1");
    if (axis >= box.dim()) throw std::invalid_argument("occupation_measure: axis out of range");
    lo_ = box.low()[axis];
    hi_ = box.high()[axis];
  }

  void add(std::span<const double> x) {
    const double t = (x[axis_] - lo_) / (hi_ - lo_);
    auto b = static_cast<long long>(std::floor(t * static_cast<double>(counts_.size())));
    b = std::clamp<long long>(b, 0, static_cast<long long>(counts_.size()) - 1);
    ++counts_[static_cast<std::size_t>(b)];
    ++total_;
  }

  std::size_t total() const { return total_; }

  OccupationHistogram histogram() const {
    if (total_ == 0) throw std::runtime_error("occupation_measure: no iterates");
    OccupationHistogram h;
    const std::size_t bins = counts_.size();
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
      h.edges[i] = lo_ + (hi_ - lo_) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.edges[bins] = hi_;
    h.mass.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
      h.mass[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
    }
    return h;
  }

  const std::vector<std::size_t>& counts() const { return counts_; }

 private:
  double lo_;
  double hi_;
  std::size_t axis_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

// Fraction of X_1..X_N per bin (X_0 is not counted).
inline OccupationHistogram occupation_measure(const RunTrace& trace, const BoxDomain& box, std::size_t bins,
                                              std::size_t axis = 0) {
  OccupationAccumulator acc(box, bins, axis);
  for (const auto& r : trace.records) {
    if (r.n > 0) acc.add(r.position);
  }
  return acc.histogram();
}

// Streams a run straight into the accumulator.
inline OccupationHistogram occupation_run(const SolverConfig& cfg, RngStream rng, std::size_t bins,
                                          std::size_t axis = 0) {
  OccupationAccumulator acc(cfg.box, bins, axis);
  Solver solver(cfg, rng);
  for (std::size_t n = 1; n <= cfg.iterations; ++n) acc.add(solver.step().position);
  return acc.histogram();
}

// Mass of the bins whose centres fall in [lo, hi].
inline double region_mass(const OccupationHistogram& h, double lo, double hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double c = 0.5 * (h.edges[i] + h.edges[i + 1]);
    if (c >= lo && c <= hi) m += h.mass[i];
  }
  return m;
}

}  // namespace adavar
