#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dichotomy/errors.hpp"

namespace dichotomy {

/// x' = f(t, x, u), y = C(t) x.
struct DynamicalModel {
  using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using Jacobian =
      std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using Output = std::function<Eigen::MatrixXd(double)>;

  std::string tag;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  /// Jacobian independent of the state (linear time-varying systems).
  bool linear = false;
  Rhs f;
  Jacobian jacobian;
  Output output;
  /// kappa = 1/2 max_i sup ||Hess f_i||, when known in closed form.
  std::optional<double> hessian_bound;

  [[nodiscard]] Eigen::Index outputs() const { return output(0.0).rows(); }
  [[nodiscard]] Eigen::VectorXd zero_input() const { return Eigen::VectorXd::Zero(m); }
};

// Lorenz'96: dz_i = (z_{i+1} - z_{i-2}) z_{i-1} - z_i + F with cyclic indices.
// Indices here are 0-based; wrap() is the only place the cyclic convention lives.

namespace detail {
inline Eigen::Index wrap(Eigen::Index i, Eigen::Index n) { return ((i % n) + n) % n; }
inline void require_lorenz_dim(Eigen::Index n) {
  if (n < 4) throw DimensionMismatch("Lorenz'96 needs n >= 4, got " + std::to_string(n));
}
}  // namespace detail

template <class Derived>
[[nodiscard]] Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> lorenz96_rhs(
    const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar forcing) {
  using detail::wrap;
  const Eigen::Index n = z.size();
  detail::require_lorenz_dim(n);
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> dz(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dz(i) = (z(wrap(i + 1, n)) - z(wrap(i - 2, n))) * z(wrap(i - 1, n)) - z(i) + forcing;
  return dz;
}

template <class Derived>
[[nodiscard]] Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
lorenz96_jacobian(const Eigen::MatrixBase<Derived>& z) {
  using detail::wrap;
  using T = typename Derived::Scalar;
  const Eigen::Index n = z.size();
  detail::require_lorenz_dim(n);
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> jac =
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index im2 = wrap(i - 2, n), im1 = wrap(i - 1, n), ip1 = wrap(i + 1, n);
    jac(i, im2) = -z(im1);
    jac(i, im1) = z(ip1) - z(im2);
    jac(i, i) = T(-1);
    jac(i, ip1) = z(im1);
  }
  return jac;
}

/// Constant Hessian of the i-th Lorenz'96 component (0-based i).
[[nodiscard]] Eigen::MatrixXd lorenz96_hessian(Eigen::Index i, Eigen::Index n);

/// 1/2 max_i ||Hess f_i||_2, evaluated from the explicit Hessians.
[[nodiscard]] double lorenz96_hessian_bound(Eigen::Index n);

/// p x n selector of states 1, d+1, ..., (p-1)d+1 (1-based) with d = floor(n / p).
[[nodiscard]] Eigen::MatrixXd strided_output_matrix(Eigen::Index n, Eigen::Index p);

/// z_i = sin(2 pi (i-1) / n), 1-based i.
[[nodiscard]] Eigen::VectorXd sine_initial_condition(Eigen::Index n);

[[nodiscard]] DynamicalModel make_lorenz96(Eigen::Index n, double forcing, Eigen::Index p);

/// Linear time-varying model x' = A(t) x with the given output matrix.
[[nodiscard]] DynamicalModel make_linear(std::string tag, std::function<Eigen::MatrixXd(double)> a,
                                         Eigen::MatrixXd c);

[[nodiscard]] DynamicalModel make_double_integrator();
[[nodiscard]] DynamicalModel make_scalar_counterexample();
[[nodiscard]] DynamicalModel make_diagonal_lti();
/// A(t) = A0 + A1 sin(w1 t) + A2 cos(w2 t) with seeded Gaussian coefficient matrices.
/// Output selects states 1 and 3.
[[nodiscard]] DynamicalModel make_sinusoidal_ltv(std::uint64_t seed, Eigen::Index n = 4);

/// Double integrator, scalar counterexample, diag(2,-1), seeded 4-state sinusoidal LTV.
[[nodiscard]] std::vector<DynamicalModel> test_models();

struct ModelParams {
  Eigen::Index n = 18;
  double forcing = 8.0;
  Eigen::Index p = 5;
  std::uint64_t seed = 1;
};

/// Tags: lorenz96, double_integrator, scalar_counterexample, diag_lti, sinusoidal_ltv.
[[nodiscard]] DynamicalModel make_model(const std::string& tag, const ModelParams& params);
[[nodiscard]] const std::vector<std::string>& model_tags();

struct JacobianCheck {
  double max_relative_error = 0.0;
  int points = 0;
};

/// Compares the model Jacobian with central differences of f at seeded random points
/// x ~ scale * N(0, I), t ~ U(0, 10). Relative error is
/// max|J - J_fd| / max(1, max|J|).
[[nodiscard]] JacobianCheck jacobian_fd_check(const DynamicalModel& model, int points,
                                              std::uint64_t seed, double step = 1e-6,
                                              double scale = 1.0);

}  // namespace dichotomy
