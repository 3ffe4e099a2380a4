#include <algorithm>
#include <cmath>
#include <limits>

#include "dichotomy/harness.hpp"
#include "dichotomy/rng.hpp"

namespace dichotomy {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kJacobianPoints = 20;
constexpr double kJacobianTol = 1e-5;
constexpr double kContainmentTol = 1e-9;
constexpr int kRandomLtvSystems = 10;

CheckResult at_most(std::string name, double value, double tol) {
  return {std::move(name), value <= tol, value, tol};
}

/// Largest amount by which lambda escapes a Bohl interval, and by which a 2H interval
/// escapes the H interval.
struct IntervalViolations {
  double containment = 0.0;
  double monotonicity = 0.0;
};

IntervalViolations interval_violations(const DynamicalModel& model, std::uint64_t seed) {
  const StepSpec spec{0.01, 0.0, 300.0};
  const MatrixXd frame = random_orthogonal_frame(model.n, model.n, seed);
  const auto run = evolve_spectral(model, VectorXd::Ones(model.n), frame, spec);
  const std::vector<double> windows{10.0, 20.0, 50.0};
  const auto est = estimate_spectrum(run.record, windows, 10.0);
  IntervalViolations v;
  for (const auto& [w, intervals] : est.bohl)
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const double lam = est.lyapunov(static_cast<Eigen::Index>(i));
      v.containment = std::max({v.containment, intervals[i].lower - lam, lam - intervals[i].upper});
    }
  const auto& fine = est.bohl.at(10.0);
  const auto& coarse = est.bohl.at(20.0);
  for (std::size_t i = 0; i < fine.size(); ++i)
    v.monotonicity = std::max({v.monotonicity, fine[i].lower - coarse[i].lower,
                               coarse[i].upper - fine[i].upper});
  return v;
}

double lti_ground_truth_error() {
  const DynamicalModel model = make_diagonal_lti();
  const auto run = evolve_spectral(model, VectorXd::Ones(2), MatrixXd::Identity(2, 2),
                                   StepSpec{0.01, 0.0, 100.0});
  const std::vector<double> windows{50.0};
  const auto est = estimate_spectrum(run.record, windows, 10.0);
  const Eigen::Vector2d truth(2.0, -1.0);
  double err = (est.lyapunov - truth).cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& iv = est.bohl.at(50.0)[i];
    err = std::max({err, std::abs(iv.lower - truth(static_cast<Eigen::Index>(i))),
                    std::abs(iv.upper - truth(static_cast<Eigen::Index>(i)))});
  }
  return err;
}

std::pair<double, double> counterexample_bohl() {
  const DynamicalModel model = make_scalar_counterexample();
  const auto run = evolve_spectral(model, VectorXd::Ones(1), MatrixXd::Identity(1, 1),
                                   StepSpec{1e-3, 0.0, 200.0});
  const double upper10 = bohl_exponents(run.record, 10.0, 0.0).front().upper;
  double smallest = std::numeric_limits<double>::infinity();
  for (double w : {1.0, 10.0, 100.0})
    smallest = std::min(smallest, bohl_exponents(run.record, w, 0.0).front().upper);
  return {std::abs(upper10 - std::log(11.0) / 10.0), smallest};
}

double orthogonality_drift(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const MatrixXd a = rng.gaussian_matrix(6, 6);
  MatrixXd q = modified_gram_schmidt(rng.gaussian_matrix(6, 6)).q;
  auto rhs = [&](double, const MatrixXd& frame) -> MatrixXd { return reduced_qr_rhs(frame, a); };
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    q = projected_matrix_step(rhs, 0.01 * i, q, 0.01);
    worst = std::max(worst, orthogonality_defect(q));
  }
  return worst;
}

double riccati_projection_deviation(const ExperimentConfig& cfg) {
  const DynamicalModel model = make_sinusoidal_ltv(cfg.seed);
  const MatrixXd frame = random_orthogonal_frame(model.n, model.n, cfg.seed + 1);
  return full_riccati_projection_check(model, VectorXd::Ones(model.n), frame,
                                       MatrixXd::Identity(2, 2),
                                       cfg.g1_scale * MatrixXd::Identity(2, 2),
                                       StepSpec{1e-3, 0.0, 5.0});
}

double eso_ekbf_gap(const ExperimentConfig& cfg) {
  const Eigen::Index n = 8;
  const DynamicalModel model = make_lorenz96(n, cfg.forcing, 4);
  const VectorXd x0 = sine_initial_condition(n);
  SplitMix64 rng(cfg.seed);
  const VectorXd x_hat = x0 + rng.uniform_vector(n, -1e-3, 1e-3);
  const MatrixXd frame = modified_gram_schmidt(rng.gaussian_matrix(n, n)).q;
  const MatrixXd g = cfg.g1_scale * MatrixXd::Identity(n, n);
  const StepSpec spec{cfg.h, 0.0, 10.0};
  const RunLog eso = simulate_eso(
      model, x0, make_observer_state(model, 0.0, x_hat, frame, MatrixXd::Identity(n, n), g), spec);
  const RunLog ekbf =
      simulate_ekbf(model, x0, EkbfState{x_hat, {MatrixXd::Identity(n, n), g}}, spec);
  if (eso.failed || ekbf.failed || eso.estimates.size() != ekbf.estimates.size())
    return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (std::size_t i = 0; i < eso.estimates.size(); ++i)
    gap = std::max(gap, (eso.estimates[i] - ekbf.estimates[i]).norm());
  return gap;
}

double zero_error_drift(const ExperimentConfig& cfg) {
  const DynamicalModel model = make_lorenz96(cfg.n, cfg.forcing, cfg.p);
  const VectorXd x0 = sine_initial_condition(cfg.n);
  const Eigen::Index k = std::min<Eigen::Index>(7, cfg.n);
  const MatrixXd frame = random_orthogonal_frame(cfg.n, k, cfg.seed);
  const RunLog log = simulate_eso(
      model, x0,
      make_observer_state(model, 0.0, x0, frame, MatrixXd::Identity(k, k),
                          cfg.g1_scale * MatrixXd::Identity(k, k)),
      StepSpec{cfg.h, 0.0, 10.0});
  if (log.failed) return std::numeric_limits<double>::infinity();
  return *std::max_element(log.error_norm.begin(), log.error_norm.end());
}

/// Largest 8th upper Bohl exponent over runs from random unit-sphere initial conditions.
double random_ic_eighth_upper_bohl(const ExperimentConfig& cfg) {
  const DynamicalModel model = make_lorenz96(cfg.n, cfg.forcing, cfg.p);
  const Eigen::Index k = std::min<Eigen::Index>(9, cfg.n);
  double worst = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.random_ic_runs; ++r) {
    SplitMix64 rng(cfg.seed + static_cast<std::uint64_t>(r));
    VectorXd x0 = rng.gaussian_matrix(cfg.n, 1);
    x0 /= x0.norm();
    const MatrixXd frame = modified_gram_schmidt(rng.gaussian_matrix(cfg.n, k)).q;
    const auto run = evolve_spectral(model, x0, frame, StepSpec{cfg.h, 0.0, cfg.random_ic_tf});
    const auto intervals = bohl_exponents(run.record, cfg.random_ic_window, cfg.burn_in);
    worst = std::max(worst, intervals.at(7).upper);
  }
  return worst;
}

}  // namespace

VerifyReport run_verification(const std::vector<DynamicalModel>& catalog,
                              const ExperimentConfig& cfg) {
  VerifyReport report;
  auto& checks = report.checks;

  std::vector<DynamicalModel> with_lorenz = catalog;
  with_lorenz.push_back(make_lorenz96(cfg.n, cfg.forcing, cfg.p));
  for (const auto& model : with_lorenz) {
    const double scale = model.tag == "lorenz96" ? 3.0 : 1.0;
    const auto jc = jacobian_fd_check(model, kJacobianPoints, cfg.seed, 1e-6, scale);
    checks.push_back(at_most("jacobian_fd:" + model.tag, jc.max_relative_error, kJacobianTol));
  }

  double containment = 0.0, monotonicity = 0.0;
  for (const auto& model : catalog) {
    if (!model.linear) continue;
    const auto v = interval_violations(model, cfg.seed);
    checks.push_back(at_most("containment:" + model.tag, v.containment, kContainmentTol));
    monotonicity = std::max(monotonicity, v.monotonicity);
  }
  for (int i = 0; i < kRandomLtvSystems; ++i) {
    const auto seed = cfg.seed + 100 + static_cast<std::uint64_t>(i);
    const auto v = interval_violations(make_sinusoidal_ltv(seed), seed);
    containment = std::max(containment, v.containment);
    monotonicity = std::max(monotonicity, v.monotonicity);
  }
  checks.push_back(at_most("containment:random_ltv", containment, kContainmentTol));
  checks.push_back(at_most("window_monotonicity", monotonicity, kContainmentTol));

  checks.push_back(at_most("lti_ground_truth", lti_ground_truth_error(), 1e-9));
  const auto [counter_err, counter_min] = counterexample_bohl();
  checks.push_back(at_most("counterexample_upper_bohl", counter_err, 1e-5));
  checks.push_back({"counterexample_strictly_positive", counter_min > 0.0, counter_min, 0.0});
  checks.push_back(at_most("orthogonality_drift", orthogonality_drift(cfg.seed), 1e-10));
  checks.push_back(at_most("riccati_projection", riccati_projection_deviation(cfg), 1e-6));
  checks.push_back(at_most("eso_ekbf_reduction", eso_ekbf_gap(cfg), 1e-8));
  checks.push_back(at_most("zero_error_fixed_point", zero_error_drift(cfg), 1e-9));
  if (cfg.random_ic_runs > 0) {
    const double worst = random_ic_eighth_upper_bohl(cfg);
    checks.push_back({"random_ic_eighth_bohl_negative", worst < 0.0, worst, 0.0});
  }
  return report;
}

}  // namespace dichotomy
