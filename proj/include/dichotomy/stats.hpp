#pragma once

#include <span>
#include <vector>

namespace dichotomy {

/// Empirical quantile with linear interpolation at position (N-1) q of the sorted values.
[[nodiscard]] double quantile(std::span<const double> values, double q);

/// Saturation floor of estimation-error norms; samples at or below it are not fitted.
inline constexpr double kErrorFloor = 1e-13;

struct FitWindow {
  double begin = 0.0;
  double end = 0.0;
};

/// Least-squares slope of ln(error) against t over samples inside `window`, excluding
/// samples at or below kErrorFloor. Needs at least 10 usable samples.
[[nodiscard]] double fit_decay_rate(std::span<const double> times,
                                    std::span<const double> error_norms, FitWindow window);

}  // namespace dichotomy
