#pragma once

// Iteration-varying scalars: step size, low/high noise levels and cutoffs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace adavar {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Radius of the d-dimensional ball of unit volume.
inline double unit_ball_radius(int d) {
  if (d < 1) throw std::invalid_argument("unit_ball_radius: d must be >= 1");
  const double dd = static_cast<double>(d);
  return std::exp(std::lgamma(dd / 2.0 + 1.0) / dd) / std::sqrt(std::numbers::pi);
}

// Hessian bounds b1 I <= H <= b2 I on the strongly convex neighbourhood.
struct CurvatureBounds {
  double b1 = 1.0;
  double b2 = 1.0;

  void validate() const {
    if (!(b1 > 0.0) || !(b2 >= b1) || !std::isfinite(b2)) {
      throw std::invalid_argument("CurvatureBounds: require 0 < b1 <= b2 < inf");
    }
  }
};

struct CriticalConstants {
  double gamma_star;
  double c_star;
  double alpha_star;
};

inline CriticalConstants critical_constants(const CurvatureBounds& cb, double eta) {
  cb.validate();
  if (!(eta > 0.0 && eta < 2.0 / cb.b2)) {
    throw std::invalid_argument("critical_constants: eta must lie in (0, 2/b2)");
  }
  const double contraction = 2.0 * eta * cb.b2 - eta * eta * cb.b2 * cb.b2;
  const double gamma = 1.0 / contraction;
  const double c = contraction / 4.0 * std::pow(cb.b1 / cb.b2, 1.5);
  return {gamma, c, c * c / 2.0};
}

// Volume-driven schedule with a constant step and algebraic volume decay:
// |Omega_1| = |Omega_0|, |Omega_{n+1}| = |Omega_0| n^-alpha. Cutoffs are looked
// up in a table (index n-1) produced by inverting a sublevel-volume estimate.
struct TheoreticalSchedule {
  double alpha = 0.01;
  double omega0_volume = 1.0;
  int dim = 1;
  double eta = 1.0;
  CurvatureBounds curvature;
  std::vector<double> cutoffs;
  double sigma_high = kInf;  // +inf selects the restart form

  void validate() const {
    curvature.validate();
    if (dim < 1) throw std::invalid_argument("TheoreticalSchedule: dim must be >= 1");
    if (!(omega0_volume > 0.0)) throw std::invalid_argument("TheoreticalSchedule: omega0_volume must be > 0");
    const auto cc = critical_constants(curvature, eta);
    if (!(alpha > 0.0 && alpha < cc.alpha_star)) {
      throw std::invalid_argument("TheoreticalSchedule: alpha must lie in (0, alpha*) with alpha* = " +
                                  std::to_string(cc.alpha_star));
    }
  }

  double volume(std::size_t n) const {
    if (n <= 2) return omega0_volume;
    return omega0_volume * std::pow(static_cast<double>(n - 1), -alpha);
  }

  double cutoff(std::size_t n) const {
    if (cutoffs.empty()) return kInf;
    const std::size_t i = std::min(std::max<std::size_t>(n, 1), cutoffs.size()) - 1;
    return cutoffs[i];
  }
};

inline double theoretical_sigma(const TheoreticalSchedule& s, std::size_t n) {
  if (n < 2) throw std::invalid_argument("theoretical_sigma: n must be >= 2");
  return unit_ball_radius(s.dim) * std::pow(s.volume(n), 1.0 / s.dim) / std::sqrt(std::log(static_cast<double>(n)));
}

// Quantile-driven schedule: sigma0 n^-alpha below the running quantile cutoff,
// sigma_high at or above it. The cutoff is the raw running quantile of all
// observed values, or its running minimum when monotone_cutoff is set.
struct PracticalSchedule {
  double sigma0 = 1.0;
  double sigma_high = 20.0;
  double alpha = 1.0;
  double quantile = 0.5;
  double eta = 1.0;
  bool monotone_cutoff = false;

  void validate() const {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("PracticalSchedule: sigma0 must be > 0");
    if (!(sigma_high > 0.0)) throw std::invalid_argument("PracticalSchedule: sigma_high must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("PracticalSchedule: alpha must be > 0");
    if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("PracticalSchedule: quantile must be in (0,1)");
    if (!(eta > 0.0)) throw std::invalid_argument("PracticalSchedule: eta must be > 0");
  }

  double sigma_low(std::size_t n) const { return sigma0 * std::pow(static_cast<double>(std::max<std::size_t>(n, 1)), -alpha); }
};

inline double practical_sigma(const PracticalSchedule& s, std::size_t n, double f_value, double cutoff) {
  if (n < 1) throw std::invalid_argument("practical_sigma: n must be >= 1");
  return f_value < cutoff ? s.sigma_low(n) : s.sigma_high;
}

enum class ClassicalDecay { inverse_sqrt_n, inverse_sqrt_log_n };

// State-independent annealing noise.
struct ClassicalSchedule {
  double sigma0 = 1.0;
  ClassicalDecay decay = ClassicalDecay::inverse_sqrt_n;
  double eta = 1.0;

  void validate() const {
    if (!(sigma0 >= 0.0)) throw std::invalid_argument("ClassicalSchedule: sigma0 must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("ClassicalSchedule: eta must be > 0");
  }

  double sigma(std::size_t n) const {
    const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
    switch (decay) {
      case ClassicalDecay::inverse_sqrt_n:
        return sigma0 / std::sqrt(nn);
      case ClassicalDecay::inverse_sqrt_log_n:
        // log 1 = 0; the first step reuses n = 2.
        return sigma0 / std::sqrt(std::log(std::max(nn, 2.0)));
    }
    return sigma0;
  }
};

// Logarithmic fallback: eta_n ~ 1/log log n, |Omega_n| ~ 1/log n and sigma_n
// tied to the volume as in the volume-driven schedule. Leading constants are
// eta0 and omega0_volume; indices below 3 reuse n = 3.
struct LogarithmicSchedule {
  double eta0 = 1.0;
  double omega0_volume = 1.0;
  int dim = 1;
  std::vector<double> cutoffs;
  double sigma_high = kInf;

  void validate() const {
    if (!(eta0 > 0.0)) throw std::invalid_argument("LogarithmicSchedule: eta0 must be > 0");
    if (!(omega0_volume > 0.0)) throw std::invalid_argument("LogarithmicSchedule: omega0_volume must be > 0");
    if (dim < 1) throw std::invalid_argument("LogarithmicSchedule: dim must be >= 1");
  }

  static double clamp_n(std::size_t n) { return static_cast<double>(std::max<std::size_t>(n, 3)); }

  // log log 3 < 1, so the step is held at eta0 until log log n exceeds 1.
  double eta(std::size_t n) const { return eta0 / std::max(1.0, std::log(std::log(clamp_n(n)))); }
  double volume(std::size_t n) const { return omega0_volume / std::log(clamp_n(n)); }
  double sigma(std::size_t n) const {
    return unit_ball_radius(dim) * std::pow(volume(n), 1.0 / dim) / std::sqrt(std::log(clamp_n(n)));
  }
  double cutoff(std::size_t n) const {
    if (cutoffs.empty()) return kInf;
    const std::size_t i = std::min(std::max<std::size_t>(n, 1), cutoffs.size()) - 1;
    return cutoffs[i];
  }
};

using Schedule = std::variant<TheoreticalSchedule, PracticalSchedule, ClassicalSchedule, LogarithmicSchedule>;

// Everything a single step needs.
struct ScheduleState {
  std::size_t n = 1;
  double eta = 1.0;
  double sigma_low = 0.0;
  double sigma_high = kInf;
  double cutoff = kInf;
  // Strict comparison puts f == cutoff in the high regime.
  bool strict = false;

  bool low(double f) const { return strict ? f < cutoff : f <= cutoff; }
  double sigma(double f) const { return low(f) ? sigma_low : sigma_high; }
};

// Running q-quantile (lower convention: element floor(q (len-1)) of the sorted
// history) in O(log n) per insertion, using a max-heap holding the smallest
// floor(q (len-1)) + 1 values and a min-heap holding the rest.
class QuantileTracker {
 public:
  explicit QuantileTracker(double q) : q_(q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("QuantileTracker: q must be in (0,1)");
  }

  void push(double v) {
    if (lower_.empty() || v <= lower_.top()) {
      lower_.push(v);
    } else {
      upper_.push(v);
    }
    ++count_;
    const std::size_t target = static_cast<std::size_t>(std::floor(q_ * static_cast<double>(count_ - 1))) + 1;
    while (lower_.size() > target) {
      upper_.push(lower_.top());
      lower_.pop();
    }
    while (lower_.size() < target) {
      lower_.push(upper_.top());
      upper_.pop();
    }
  }

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  double value() const {
    if (empty()) throw std::logic_error("QuantileTracker: empty history");
    return lower_.top();
  }

 private:
  double q_;
  std::size_t count_ = 0;
  std::priority_queue<double> lower_;
  std::priority_queue<double, std::vector<double>, std::greater<>> upper_;
};

// Batch form of the cutoff update: the q-quantile of history, clamped so the
// cutoff sequence never increases.
inline double update_cutoff(std::span<const double> history, double q, std::optional<double> previous = {}) {
  if (history.empty()) throw std::invalid_argument("update_cutoff: empty history");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("update_cutoff: q must be in (0,1)");
  std::vector<double> sorted(history.begin(), history.end());
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double quant = sorted[k];
  return previous ? std::min(*previous, quant) : quant;
}

// Incremental equivalent of update_cutoff applied after every observation
// (clamped when monotone, the raw running quantile otherwise).
class CutoffTracker {
 public:
  explicit CutoffTracker(double q, bool monotone = true) : tracker_(q), monotone_(monotone) {}

  double observe(double f) {
    tracker_.push(f);
    cutoff_ = monotone_ ? std::min(cutoff_, tracker_.value()) : tracker_.value();
    return cutoff_;
  }

  double cutoff() const { return cutoff_; }
  std::size_t size() const { return tracker_.size(); }

 private:
  QuantileTracker tracker_;
  bool monotone_;
  double cutoff_ = kInf;
};

// Turns a Schedule into per-step ScheduleStates. Single owner per run.
class ScheduleDriver {
 public:
  explicit ScheduleDriver(Schedule schedule) : schedule_(std::move(schedule)) {
    std::visit([](const auto& s) { s.validate(); }, schedule_);
    if (const auto* p = std::get_if<PracticalSchedule>(&schedule_)) tracker_.emplace(p->quantile, p->monotone_cutoff);
  }

  const Schedule& schedule() const { return schedule_; }

  // Feed the objective value of the newest iterate (only the quantile-driven
  // schedule keeps history).
  void observe(double f) {
    if (tracker_) tracker_->observe(f);
  }

  ScheduleState at(std::size_t n) const {
    ScheduleState st;
    st.n = n;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, TheoreticalSchedule>) {
            st.eta = s.eta;
            st.sigma_low = theoretical_sigma(s, std::max<std::size_t>(n, 2));
            st.sigma_high = s.sigma_high;
            st.cutoff = s.cutoff(n);
          } else if constexpr (std::is_same_v<T, PracticalSchedule>) {
            st.eta = s.eta;
            st.sigma_low = s.sigma_low(n);
            st.sigma_high = s.sigma_high;
            st.cutoff = tracker_->cutoff();
            st.strict = true;
          } else if constexpr (std::is_same_v<T, ClassicalSchedule>) {
            st.eta = s.eta;
            st.sigma_low = s.sigma(n);
            st.sigma_high = st.sigma_low;
            st.cutoff = kInf;
          } else {
            st.eta = s.eta(n);
            st.sigma_low = s.sigma(n);
            st.sigma_high = s.sigma_high;
            st.cutoff = s.cutoff(n);
          }
        },
        schedule_);
    return st;
  }

 private:
  Schedule schedule_;
  std::optional<CutoffTracker> tracker_;
};

}  // namespace adavar
