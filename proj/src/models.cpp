#include "dichotomy/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dichotomy/rng.hpp"

namespace dichotomy {

Eigen::MatrixXd lorenz96_hessian(Eigen::Index i, Eigen::Index n) {
  using detail::wrap;
  detail::require_lorenz_dim(n);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
  const Eigen::Index im2 = wrap(i - 2, n), im1 = wrap(i - 1, n), ip1 = wrap(i + 1, n);
  // d2/dz_{i+1} dz_{i-1} of z_{i+1} z_{i-1} and of -z_{i-2} z_{i-1}
  hess(ip1, im1) += 1.0;
  hess(im1, ip1) += 1.0;
  hess(im2, im1) -= 1.0;
  hess(im1, im2) -= 1.0;
  return hess;
}

double lorenz96_hessian_bound(Eigen::Index n) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lorenz96_hessian(i, n),
                                                             Eigen::EigenvaluesOnly);
    worst = std::max(worst, eig.eigenvalues().cwiseAbs().maxCoeff());
  }
  return 0.5 * worst;
}

Eigen::MatrixXd strided_output_matrix(Eigen::Index n, Eigen::Index p) {
  if (p < 1 || p > n)
    throw ConfigError("p", "measurement count must lie in [1, " + std::to_string(n) + "]");
  const Eigen::Index d = n / p;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, n);
  for (Eigen::Index j = 0; j < p; ++j) c(j, j * d) = 1.0;
  return c;
}

Eigen::VectorXd sine_initial_condition(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i)
    z(i) = std::sin(static_cast<double>(i) / static_cast<double>(n) * 2.0 * std::numbers::pi);
  return z;
}

DynamicalModel make_lorenz96(Eigen::Index n, double forcing, Eigen::Index p) {
  detail::require_lorenz_dim(n);
  DynamicalModel model;
  model.tag = "lorenz96";
  model.n = n;
  model.f = [forcing](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return lorenz96_rhs(x, forcing);
  };
  model.jacobian = [](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return lorenz96_jacobian(x);
  };
  model.output = [c = strided_output_matrix(n, p)](double) { return c; };
  model.hessian_bound = lorenz96_hessian_bound(n);
  return model;
}

DynamicalModel make_linear(std::string tag, std::function<Eigen::MatrixXd(double)> a,
                           Eigen::MatrixXd c) {
  const Eigen::Index n = a(0.0).rows();
  if (a(0.0).cols() != n || c.cols() != n)
    throw DimensionMismatch("linear model: A must be square and C must have n columns");
  DynamicalModel model;
  model.tag = std::move(tag);
  model.n = n;
  model.linear = true;
  model.f = [a](double t, const Eigen::VectorXd& x, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return a(t) * x;
  };
  model.jacobian = [a](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) { return a(t); };
  model.output = [c = std::move(c)](double) { return c; };
  model.hessian_bound = 0.0;
  return model;
}

DynamicalModel make_double_integrator() {
  Eigen::Matrix2d a;
  a << 0, 1, 0, 0;
  Eigen::MatrixXd c(1, 2);
  c << 1, 0;
  return make_linear("double_integrator", [a](double) -> Eigen::MatrixXd { return a; }, c);
}

DynamicalModel make_scalar_counterexample() {
  return make_linear(
      "scalar_counterexample",
      [](double t) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, 1.0 / (1.0 + t)); },
      Eigen::MatrixXd::Ones(1, 1));
}

DynamicalModel make_diagonal_lti() {
  const Eigen::MatrixXd a = Eigen::Vector2d(2.0, -1.0).asDiagonal();
  Eigen::MatrixXd c(1, 2);
  c << 1, 1;
  return make_linear("diag_lti", [a](double) { return a; }, c);
}

DynamicalModel make_sinusoidal_ltv(std::uint64_t seed, Eigen::Index n) {
  SplitMix64 rng(seed);
  const Eigen::MatrixXd a0 = 0.5 * rng.gaussian_matrix(n, n);
  const Eigen::MatrixXd a1 = 0.5 * rng.gaussian_matrix(n, n);
  const Eigen::MatrixXd a2 = 0.5 * rng.gaussian_matrix(n, n);
  const double w1 = rng.uniform(0.5, 2.0);
  const double w2 = rng.uniform(0.5, 2.0);
  auto model = make_linear(
      "sinusoidal_ltv",
      [=](double t) -> Eigen::MatrixXd { return a0 + std::sin(w1 * t) * a1 + std::cos(w2 * t) * a2; },
      strided_output_matrix(n, std::min<Eigen::Index>(2, n)));
  return model;
}

std::vector<DynamicalModel> test_models() {
  return {make_double_integrator(), make_scalar_counterexample(), make_diagonal_lti(),
          make_sinusoidal_ltv(2024)};
}

const std::vector<std::string>& model_tags() {
  static const std::vector<std::string> tags{"lorenz96", "double_integrator",
                                             "scalar_counterexample", "diag_lti",
                                             "sinusoidal_ltv"};
  return tags;
}

DynamicalModel make_model(const std::string& tag, const ModelParams& params) {
  if (tag == "lorenz96") return make_lorenz96(params.n, params.forcing, params.p);
  if (tag == "double_integrator") return make_double_integrator();
  if (tag == "scalar_counterexample") return make_scalar_counterexample();
  if (tag == "diag_lti") return make_diagonal_lti();
  if (tag == "sinusoidal_ltv") return make_sinusoidal_ltv(params.seed);
  throw ConfigError("model", "unknown model tag '" + tag + "'");
}

JacobianCheck jacobian_fd_check(const DynamicalModel& model, int points, std::uint64_t seed,
                                double step, double scale) {
  SplitMix64 rng(seed);
  JacobianCheck result;
  const Eigen::VectorXd u = model.zero_input();
  for (int s = 0; s < points; ++s) {
    const Eigen::VectorXd x = scale * rng.gaussian_matrix(model.n, 1);
    const double t = rng.uniform(0.0, 10.0);
    const Eigen::MatrixXd jac = model.jacobian(t, x, u);
    Eigen::MatrixXd fd(model.n, model.n);
    for (Eigen::Index j = 0; j < model.n; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += step;
      xm(j) -= step;
      fd.col(j) = (model.f(t, xp, u) - model.f(t, xm, u)) / (2.0 * step);
    }
    const double denom = std::max(1.0, jac.cwiseAbs().maxCoeff());
    result.max_relative_error =
        std::max(result.max_relative_error, (jac - fd).cwiseAbs().maxCoeff() / denom);
    ++result.points;
  }
  return result;
}

}  // namespace dichotomy
