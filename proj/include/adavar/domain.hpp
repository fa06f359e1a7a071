#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adavar {

// A position in R^d. Plain vector so it composes with spans and the stdlib.
using Point = std::vector<double>;

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// How iterates that leave the search box are brought back.
enum class BoundaryPolicy { reflect, clamp, resample, periodic, none };

// Axis-aligned search box. low[i] < high[i] on every axis.
class BoxDomain {
 public:
  BoxDomain(Point low, Point high) : low_(std::move(low)), high_(std::move(high)) {
    if (low_.empty()) throw std::invalid_argument("BoxDomain: dimension must be >= 1");
    if (low_.size() != high_.size()) throw std::invalid_argument("BoxDomain: low/high dimension mismatch");
    if (!all_finite(low_) || !all_finite(high_)) throw std::invalid_argument("BoxDomain: bounds must be finite");
    for (std::size_t i = 0; i < low_.size(); ++i) {
      if (!(low_[i] < high_[i])) {
        throw std::invalid_argument("BoxDomain: low[" + std::to_string(i) + "] must be < high[" +
                                    std::to_string(i) + "]");
      }
    }
  }

  static BoxDomain cube(std::size_t dim, double low, double high) {
    return BoxDomain(Point(dim, low), Point(dim, high));
  }

  std::size_t dim() const { return low_.size(); }
  const Point& low() const { return low_; }
  const Point& high() const { return high_; }
  double width(std::size_t i) const { return high_[i] - low_[i]; }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= width(i);
    return v;
  }

  Point center() const {
    Point c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (low_[i] + high_[i]);
    return c;
  }

  bool contains(std::span<const double> x) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (!(x[i] >= low_[i] && x[i] <= high_[i])) return false;
    }
    return true;
  }

  // Mirror reflection at the faces; handles excursions of any length.
  double reflect(std::size_t i, double v) const {
    const double w = width(i);
    double t = std::fmod(v - low_[i], 2.0 * w);
    if (t < 0.0) t += 2.0 * w;
    if (t > w) t = 2.0 * w - t;
    return low_[i] + t;
  }

  // Periodic wrap onto [low, high).
  double wrap(std::size_t i, double v) const {
    const double w = width(i);
    double t = std::fmod(v - low_[i], w);
    if (t < 0.0) t += w;
    if (t >= w) t = 0.0;
    return low_[i] + t;
  }

  double clamp(std::size_t i, double v) const { return std::min(std::max(v, low_[i]), high_[i]); }

 private:
  Point low_;
  Point high_;
};

}  // namespace adavar
