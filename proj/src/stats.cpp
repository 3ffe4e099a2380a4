#include "dichotomy/stats.hpp"

#include <algorithm>
#include <cmath>

#include "dichotomy/errors.hpp"

namespace dichotomy {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw NumericalError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q", "quantile fraction must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  const double a = sorted[lo], b = sorted[hi];
  if (frac == 0.0 || a == b) return a;
  if (std::isinf(b)) return b;
  return std::clamp(a + frac * (b - a), a, b);
}

double fit_decay_rate(std::span<const double> times, std::span<const double> error_norms,
                      FitWindow window) {
  if (times.size() != error_norms.size())
    throw DimensionMismatch("times and error norms differ in length");
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i], e = error_norms[i];
    if (t < window.begin || t > window.end) continue;
    if (!(e > kErrorFloor) || !std::isfinite(e)) continue;
    ts.push_back(t);
    ys.push_back(std::log(e));
  }
  if (ts.size() < 10) throw NumericalError("fewer than 10 unsaturated samples in the fit window");
  const double nn = static_cast<double>(ts.size());
  double mean_t = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mean_t += ts[i];
    mean_y += ys[i];
  }
  mean_t /= nn;
  mean_y /= nn;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mean_t) * (ts[i] - mean_t);
    sxy += (ts[i] - mean_t) * (ys[i] - mean_y);
  }
  if (!(sxx > 0.0)) throw NumericalError("fit window has no time spread");
  return sxy / sxx;
}

}  // namespace dichotomy
