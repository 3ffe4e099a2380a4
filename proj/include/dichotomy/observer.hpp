#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dichotomy/errors.hpp"
#include "dichotomy/models.hpp"
#include "dichotomy/ode.hpp"
#include "dichotomy/spectral.hpp"

namespace dichotomy {

/// k x k reduced Riccati matrix and its forcing term.
struct ReducedRiccati {
  Eigen::MatrixXd p1;
  Eigen::MatrixXd g1;
};

struct FullRiccati {
  Eigen::MatrixXd p;
  Eigen::MatrixXd g;
};

/// Extended subspace observer state. `gain` caches Q P1 (C Q)^T at the state's time.
struct ObserverState {
  Eigen::VectorXd x_hat;
  SubspaceFrame frame;
  ReducedRiccati riccati;
  Eigen::MatrixXd gain;
};

struct EkbfState {
  Eigen::VectorXd x_hat;
  FullRiccati riccati;
};

/// B P + P B^T - P Cb^T Cb P + G, symmetrized as (M + M^T) / 2.
template <class DB, class DC, class DP, class DG>
[[nodiscard]] Eigen::Matrix<typename DP::Scalar, Eigen::Dynamic, Eigen::Dynamic> riccati_rhs(
    const Eigen::MatrixBase<DB>& b, const Eigen::MatrixBase<DC>& c_bar,
    const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DG>& g) {
  using Mat = Eigen::Matrix<typename DP::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index k = p.rows();
  if (p.cols() != k || b.rows() != k || b.cols() != k || g.rows() != k || g.cols() != k ||
      c_bar.cols() != k)
    throw DimensionMismatch("Riccati operands disagree on dimension " + std::to_string(k));
  const Mat pc = p * c_bar.transpose();
  const Mat bp = b * p;
  const Mat m = bp + bp.transpose() - pc * pc.transpose() + g;
  return 0.5 * (m + m.transpose());
}

/// L = Q P1 (C Q)^T.
template <class DQ, class DP, class DC>
[[nodiscard]] Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> observer_gain(
    const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DP>& p1,
    const Eigen::MatrixBase<DC>& c) {
  if (p1.rows() != q.cols() || p1.cols() != q.cols() || c.cols() != q.rows())
    throw DimensionMismatch("gain operands disagree on dimension");
  return q * (p1 * (c * q).transpose());
}

[[nodiscard]] inline Eigen::MatrixXd observer_gain(const SubspaceFrame& frame,
                                                   const Eigen::MatrixXd& p1,
                                                   const Eigen::MatrixXd& c) {
  return observer_gain(frame.basis(), p1, c);
}

/// Builds a consistent observer state (gain evaluated with C(t)).
[[nodiscard]] ObserverState make_observer_state(const DynamicalModel& model, double t,
                                                Eigen::VectorXd x_hat, Eigen::MatrixXd frame,
                                                Eigen::MatrixXd p1, Eigen::MatrixXd g1);

/// Throws DefinitenessLoss if a Cholesky factorization of `p` fails.
void require_positive_definite(const Eigen::MatrixXd& p, double t);

/// One coupled RK4 step of (x_hat, P1, Q) with the measurement y held over the step,
/// A re-evaluated at every stage estimate, then Q re-orthonormalized, P1 symmetrized
/// and the gain recomputed at t + h.
[[nodiscard]] ObserverState eso_step(const DynamicalModel& model, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& y, const ObserverState& state,
                                     double t, double h);

struct EsoPlantStep {
  Eigen::VectorXd x;
  ObserverState state;
};

/// As eso_step, but the plant is integrated in the same RK4 step and y = C(t) x is
/// taken at every stage. The plant's own update does not depend on the observer.
[[nodiscard]] EsoPlantStep eso_step_with_plant(const DynamicalModel& model,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& x,
                                               const ObserverState& state, double t, double h);

/// Full-order extended Kalman-Bucy step with gain P C^T and held measurement.
[[nodiscard]] EkbfState ekbf_step(const DynamicalModel& model, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& y, const EkbfState& state, double t,
                                  double h);

struct EkbfPlantStep {
  Eigen::VectorXd x;
  EkbfState state;
};

[[nodiscard]] EkbfPlantStep ekbf_step_with_plant(const DynamicalModel& model,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& x, const EkbfState& state,
                                                 double t, double h);

struct RunOptions {
  /// Cholesky probe cadence in steps; 0 disables.
  std::size_t check_every = 100;
  double divergence_norm = 1e6;
  /// Record every n-th step (the final step is always recorded).
  std::size_t log_every = 1;
};

struct RunLog {
  std::vector<double> times;
  std::vector<double> error_norm;
  std::vector<double> min_eig;
  std::vector<double> max_eig;
  /// Estimates at logged times.
  std::vector<Eigen::VectorXd> estimates;
  bool failed = false;
  std::string failure;
  double failure_time = 0.0;
  /// 2 for numerical failures (definiteness loss, divergence, integration failure).
  int exit_code = 0;
};

/// Runs the ESO against the plant from x0 over `spec`. Failures are recorded, not thrown.
[[nodiscard]] RunLog simulate_eso(const DynamicalModel& model, const Eigen::VectorXd& x0,
                                  ObserverState initial, const StepSpec& spec,
                                  const RunOptions& opts = {});

[[nodiscard]] RunLog simulate_ekbf(const DynamicalModel& model, const Eigen::VectorXd& x0,
                                   EkbfState initial, const StepSpec& spec,
                                   const RunOptions& opts = {});

/// Co-integrates a square frame, the full n x n Riccati equation in triangular coordinates
/// with P(t0) = blockdiag(P1(t0), 0), G = blockdiag(G1, 0), and the reduced j x j equation,
/// returning sup_t ||P(t) - blockdiag(P1(t), 0)||_F.
[[nodiscard]] double full_riccati_projection_check(const DynamicalModel& model,
                                                   const Eigen::VectorXd& x0,
                                                   const Eigen::MatrixXd& square_frame,
                                                   const Eigen::MatrixXd& p1_initial,
                                                   const Eigen::MatrixXd& g1,
                                                   const StepSpec& spec);

struct AssumptionReport {
  /// sup ||A(t)||_2 over the samples.
  double jacobian_norm_sup = 0.0;
  double min_eig_p1 = 0.0;
  double max_eig_p1 = 0.0;
  /// 1/2 max_i ||Hess f_i||; closed form when the model provides it, otherwise a
  /// central-difference estimate maximized over the samples.
  double kappa = 0.0;
  bool kappa_exact = false;
};

[[nodiscard]] AssumptionReport assumption_probe(const DynamicalModel& model,
                                                const Trajectory& samples, const RunLog& run);

}  // namespace dichotomy
