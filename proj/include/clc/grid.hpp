#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <span>
#include <string>

#include "clc/errors.hpp"

namespace clc {

/// Rule for continuation values between state-grid nodes.
enum class Interpolation : std::uint32_t {
  linear = 0,
  /// 3-point Lagrange through the nearest node and its neighbours; exact on
  /// quadratics, so LQ value functions are reproduced without node bumps.
  quadratic = 1,
};

inline const char* to_string(Interpolation i) {
  return i == Interpolation::linear ? "linear" : "quadratic";
}

/// Uniform axis: point i = min + i (max - min) / (n - 1), i = 0..n-1.
struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  int n = 2;

  void validate(const char* name) const {
    if (!(min < max) || !std::isfinite(min) || !std::isfinite(max))
      throw InvalidInput(std::string("grid axis ") + name + ": need finite min < max");
    if (n < 2) throw InvalidInput(std::string("grid axis ") + name + ": need n >= 2");
  }

  double point(int i) const { return min + (static_cast<double>(i) * (max - min)) / (n - 1); }
  double spacing() const { return (max - min) / (n - 1); }

  /// Nearest index, ties toward the lower index, clamped to [0, n-1].
  int nearest(double x) const {
    const double f = (x - min) * (n - 1) / (max - min);
    if (!(f > 0.0)) return 0;
    if (f >= n - 1) return n - 1;
    const double fl = std::floor(f);
    int i = static_cast<int>(fl);
    if (f - fl > 0.5) ++i;
    return i;
  }

  /// Like nearest(), but rejects points more than one spacing outside the axis.
  int nearest_checked(double x, const char* what) const {
    const double h = spacing();
    if (!(x >= min - h && x <= max + h))
      throw OutOfRange(std::string(what) + ": value " + std::to_string(x) +
                       " outside [" + std::to_string(min) + ", " + std::to_string(max) +
                       "] by more than one spacing");
    return nearest(x);
  }

  /// Index of an exact grid point, or -1 if x is not one.
  int exact_index(double x) const {
    const int i = nearest(x);
    return point(i) == x ? i : -1;
  }

  bool contains(double x) const { return x >= min && x <= max; }

  /// Piecewise-linear interpolation of node values, clamped outside the axis.
  double interpolate(std::span<const double> values, double x) const {
    const double f = (x - min) * (n - 1) / (max - min);
    if (!(f > 0.0)) return values[0];
    if (f >= n - 1) return values[static_cast<std::size_t>(n - 1)];
    const double fl = std::floor(f);
    const auto i = static_cast<std::size_t>(fl);
    const double w = f - fl;
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  double interpolate_quadratic(std::span<const double> values, double x) const;
  double interpolate(std::span<const double> values, double x, Interpolation rule) const;
};

inline double GridAxis::interpolate_quadratic(std::span<const double> values, double x) const {
  if (n < 3) return interpolate(values, x);
  const double f = (x - min) * (n - 1) / (max - min);
  if (!(f > 0.0)) return values[0];
  if (f >= n - 1) return values[static_cast<std::size_t>(n - 1)];
  int i = nearest(x);
  i = std::clamp(i, 1, n - 2);
  const double s = f - i;
  const auto k = static_cast<std::size_t>(i);
  const double lo = values[k - 1], mid = values[k], hi = values[k + 1];
  return mid + 0.5 * s * (hi - lo) + 0.5 * s * s * (hi - 2.0 * mid + lo);
}

inline double GridAxis::interpolate(std::span<const double> values, double x,
                                    Interpolation rule) const {
  return rule == Interpolation::linear ? interpolate(values, x)
                                       : interpolate_quadratic(values, x);
}

/// Model-state, control, and candidate (hypothesized real state) grids.
struct GridSpec {
  GridAxis x{-2.0, 2.0, 81};
  GridAxis u{-3.0, 3.0, 241};
  GridAxis xhat{-2.0, 2.0, 81};
  Interpolation interpolation = Interpolation::quadratic;

  void validate() const {
    x.validate("x");
    u.validate("u");
    xhat.validate("xhat");
  }
};

}  // namespace clc
