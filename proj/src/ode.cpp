#include "dichotomy/ode.hpp"

#include <cmath>

namespace dichotomy {

namespace {

// Relative slack under which (tf - t0) / h counts as an integer.
constexpr double kGridSlack = 1e-9;

}  // namespace

void StepSpec::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("h", "step size must be positive");
  if (!std::isfinite(t0) || !std::isfinite(tf)) throw ConfigError("tf", "times must be finite");
  if (tf < t0) throw ConfigError("tf", "final time precedes start time");
}

std::size_t StepSpec::steps() const {
  const double ratio = (tf - t0) / h;
  const double whole = std::round(ratio);
  if (std::abs(ratio - whole) <= kGridSlack * std::max(1.0, ratio))
    return static_cast<std::size_t>(whole);
  return static_cast<std::size_t>(std::floor(ratio)) + 1;
}

bool StepSpec::uniform() const {
  const double ratio = (tf - t0) / h;
  return std::abs(ratio - std::round(ratio)) <= kGridSlack * std::max(1.0, ratio);
}

double StepSpec::time(std::size_t i) const {
  if (i >= steps()) return tf;
  return t0 + static_cast<double>(i) * h;
}

Trajectory integrate(const VectorField& f, const StepSpec& spec, const Eigen::VectorXd& x0,
                     const StepTap& tap) {
  spec.validate();
  const std::size_t n = spec.steps();
  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  traj.times.push_back(spec.time(0));
  traj.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = spec.time(i);
    try {
      x = rk4_step<Eigen::VectorXd>(f, t, x, spec.step_length(i));
    } catch (const IntegrationFailure& e) {
      throw IntegrationFailure(e.time(), i);
    }
    const double t_next = spec.time(i + 1);
    traj.times.push_back(t_next);
    traj.states.push_back(x);
    if (tap) tap(t_next, x);
  }
  return traj;
}

}  // namespace dichotomy
