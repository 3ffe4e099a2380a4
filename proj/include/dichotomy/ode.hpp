#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dichotomy/errors.hpp"

namespace dichotomy {

/// Uniform time grid t0, t0 + h, ... ending exactly at tf. When (tf - t0) / h is not
/// integral the last step is shortened to land on tf.
struct StepSpec {
  double h = 0.005;
  double t0 = 0.0;
  double tf = 1.0;

  void validate() const;
  /// Number of steps, including a final partial one.
  [[nodiscard]] std::size_t steps() const;
  [[nodiscard]] double time(std::size_t i) const;
  [[nodiscard]] double step_length(std::size_t i) const { return time(i + 1) - time(i); }
  [[nodiscard]] bool uniform() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;

  [[nodiscard]] std::size_t size() const { return times.size(); }
};

template <class T>
struct QrFactors {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> q;
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> r;
};

inline bool all_finite(double x) { return std::isfinite(x); }

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// Classical four-stage Runge-Kutta step. State may be a scalar or any Eigen dense type.
template <class State, class Field>
[[nodiscard]] State rk4_step(Field&& f, double t, const State& x, double h) {
  const double half = 0.5 * h;
  const State k1 = f(t, x);
  if (!all_finite(k1)) throw IntegrationFailure(t);
  const State k2 = f(t + half, State(x + half * k1));
  if (!all_finite(k2)) throw IntegrationFailure(t);
  const State k3 = f(t + half, State(x + half * k2));
  if (!all_finite(k3)) throw IntegrationFailure(t);
  const State k4 = f(t + h, State(x + h * k3));
  if (!all_finite(k4)) throw IntegrationFailure(t);
  return State(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

using VectorField = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
using StepTap = std::function<void(double, const Eigen::VectorXd&)>;

/// Repeated rk4_step over the grid of `spec`; `tap` sees every accepted step.
Trajectory integrate(const VectorField& f, const StepSpec& spec, const Eigen::VectorXd& x0,
                     const StepTap& tap = {});

/// Modified Gram-Schmidt with the positive-diagonal convention on R.
/// Throws SingularMatrix when a column vanishes after elimination.
template <class Derived>
[[nodiscard]] QrFactors<typename Derived::Scalar> modified_gram_schmidt(
    const Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index k = m.cols();
  QrFactors<T> out{Mat(m), Mat::Zero(k, k)};
  Mat& q = out.q;
  const T rel_floor = T(4) * std::numeric_limits<T>::epsilon();
  for (Eigen::Index j = 0; j < k; ++j) {
    const T original = q.col(j).norm();
    for (Eigen::Index i = 0; i < j; ++i) {
      const T rij = q.col(i).dot(q.col(j));
      out.r(i, j) = rij;
      q.col(j) -= rij * q.col(i);
    }
    const T rjj = q.col(j).norm();
    if (!(rjj > T(1e-300)) || rjj <= rel_floor * original) throw SingularMatrix(j);
    out.r(j, j) = rjj;
    q.col(j) /= rjj;
  }
  return out;
}

/// One RK4 step of a matrix ODE followed by re-orthonormalization; returns the Q factor.
template <class Field>
[[nodiscard]] Eigen::MatrixXd projected_matrix_step(Field&& rhs, double t,
                                                    const Eigen::MatrixXd& frame, double h) {
  const Eigen::MatrixXd advanced = rk4_step<Eigen::MatrixXd>(rhs, t, frame, h);
  try {
    return modified_gram_schmidt(advanced).q;
  } catch (const SingularMatrix& e) {
    throw FrameCollapse(t + h, e.column());
  }
}

/// Largest entry of |Q^T Q - I|.
template <class Derived>
[[nodiscard]] typename Derived::Scalar orthogonality_defect(const Eigen::MatrixBase<Derived>& q) {
  using T = typename Derived::Scalar;
  const auto k = q.cols();
  return (q.transpose() * q - Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Identity(k, k))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace dichotomy
