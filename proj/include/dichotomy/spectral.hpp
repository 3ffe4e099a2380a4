#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dichotomy/errors.hpp"
#include "dichotomy/models.hpp"
#include "dichotomy/ode.hpp"

namespace dichotomy {

/// n x k matrix with orthonormal columns.
class SubspaceFrame {
 public:
  SubspaceFrame() = default;
  /// Throws DimensionMismatch if Q^T Q deviates from I by more than `tol`.
  explicit SubspaceFrame(Eigen::MatrixXd basis, double tol = 1e-10);

  [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  [[nodiscard]] Eigen::Index ambient_dim() const noexcept { return basis_.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return basis_.cols(); }

 private:
  Eigen::MatrixXd basis_;
};

/// Q factor of a seeded standard Gaussian n x k matrix (SplitMix64, column-major fill).
[[nodiscard]] Eigen::MatrixXd random_orthogonal_frame(Eigen::Index n, Eigen::Index k,
                                                      std::uint64_t seed);

namespace detail {
template <class DQ, class DA>
void require_frame_shapes(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DA>& a) {
  if (a.rows() != a.cols() || a.rows() != q.rows() || q.cols() > q.rows())
    throw DimensionMismatch("frame is " + std::to_string(q.rows()) + "x" +
                            std::to_string(q.cols()) + ", coefficient matrix is " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

/// Splits M = Q^T A Q into its strictly-lower skew completion S1.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> skew_from_projection(
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& m) {
  const Eigen::Index k = m.rows();
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> s =
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = j + 1; i < k; ++i) {
      s(i, j) = m(i, j);
      s(j, i) = -m(i, j);
    }
  return s;
}
}  // namespace detail

/// s_ij = q_i^T A q_j for i > j, s_ji = -s_ij, zero diagonal.
template <class DQ, class DA>
[[nodiscard]] Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> skew_lower(
    const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DA>& a) {
  using Mat = Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::require_frame_shapes(q, a);
  const Mat m = q.transpose() * a * q;
  return detail::skew_from_projection(m);
}

/// B1 = Q^T A Q - S1; upper triangular with an exactly zero strict lower part.
template <class DQ, class DA>
[[nodiscard]] Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> b1(
    const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DA>& a) {
  using Mat = Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::require_frame_shapes(q, a);
  const Mat m = q.transpose() * a * q;
  Mat b = m - detail::skew_from_projection(m);
  b.template triangularView<Eigen::StrictlyLower>().setZero();
  return b;
}

/// Reduced QR flow (I - Q Q^T) A Q + Q S1, evaluated as A Q - Q B1.
template <class DQ, class DA>
[[nodiscard]] Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> reduced_qr_rhs(
    const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DA>& a) {
  using Mat = Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::require_frame_shapes(q, a);
  const Mat aq = a * q;
  const Mat m = q.transpose() * aq;
  const Mat s = detail::skew_from_projection(m);
  return aq - q * (m - s);
}

/// Samples b_ii(t) on a uniform grid plus their trapezoidal running integrals.
struct DiagonalRecord {
  std::vector<double> times;
  Eigen::MatrixXd b;           // k x samples
  Eigen::MatrixXd cumulative;  // k x samples, column 0 is zero

  [[nodiscard]] Eigen::Index directions() const { return b.rows(); }
  [[nodiscard]] std::size_t samples() const { return times.size(); }
  /// Rebuilds `cumulative` from `b` and `times`.
  void accumulate();
};

struct SpectralRun {
  DiagonalRecord record;
  SubspaceFrame frame;
  Eigen::VectorXd final_state;
};

/// Co-integrates the base state (nonlinear models) and the reduced QR flow with RK4,
/// re-orthonormalizing after every step. A(t) is the Jacobian at the stage state.
[[nodiscard]] SpectralRun evolve_spectral(const DynamicalModel& model, const Eigen::VectorXd& x0,
                                          const Eigen::MatrixXd& frame0, const StepSpec& spec);

/// (F_i(T) - F_i(burn_in)) / (T - burn_in).
[[nodiscard]] Eigen::VectorXd lyapunov_exponents(const DiagonalRecord& rec, double burn_in);

struct BohlInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Extremes of H-window averages over grid-aligned starts in [burn_in, T - H].
/// H is rounded to the nearest multiple of the grid step.
[[nodiscard]] std::vector<BohlInterval> bohl_exponents(const DiagonalRecord& rec, double window,
                                                       double burn_in);

/// Smallest j such that upper[i] < -threshold for every (0-based) i >= j.
[[nodiscard]] int count_unstable(std::span<const double> upper, double threshold = 0.0);

struct SpectralEstimate {
  Eigen::VectorXd lyapunov;
  std::map<double, std::vector<BohlInterval>> bohl;
  int j_star = 0;
  double threshold = 0.0;

  /// Upper Bohl exponents for one window.
  [[nodiscard]] std::vector<double> upper(double window) const;
};

/// Lyapunov exponents, Bohl intervals for each window and j* from the longest window.
[[nodiscard]] SpectralEstimate estimate_spectrum(const DiagonalRecord& rec,
                                                 std::span<const double> windows, double burn_in,
                                                 double threshold = 0.0);

}  // namespace dichotomy
