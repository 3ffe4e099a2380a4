#include <cmath>
#include <limits>

#include "doctest.h"
#include "dichotomy/ode.hpp"
#include "dichotomy/rng.hpp"
#include "dichotomy/spectral.hpp"

using namespace dichotomy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Householder QR with R's diagonal made positive; the reference factorization.
MatrixXd householder_q(const MatrixXd& m) {
  const Eigen::HouseholderQR<MatrixXd> qr(m);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m.rows(), m.cols());
  const MatrixXd r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Rodrigues: exp(K) for the 3x3 skew matrix K of w.
MatrixXd rotation(const Eigen::Vector3d& w) {
  MatrixXd k(3, 3);
  k << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
  const double th = w.norm();
  return MatrixXd::Identity(3, 3) + std::sin(th) / th * k + (1 - std::cos(th)) / (th * th) * k * k;
}

}  // namespace

TEST_SUITE("ode") {

TEST_CASE("rk4 single step on exponential decay") {
  auto f = [](double, const VectorXd& x) -> VectorXd { return -x; };
  const VectorXd x = rk4_step<VectorXd>(f, 0.0, VectorXd::Ones(1), 0.1);
  // 1 - h + h^2/2 - h^3/6 + h^4/24
  CHECK(x(0) == doctest::Approx(0.9048375).epsilon(1e-15));
}

TEST_CASE("rk4 integrates polynomial trajectories exactly") {
  auto f = [](double, const VectorXd& x) -> VectorXd {
    VectorXd d(2);
    d << x(1), 0.0;
    return d;
  };
  VectorXd x0(2);
  x0 << 0.0, 1.0;
  const auto traj = integrate(f, StepSpec{0.1, 0.0, 1.0}, x0);
  REQUIRE(traj.size() == 11);
  CHECK(traj.states.back()(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(traj.states.back()(1) == 1.0);
  CHECK(traj.times.back() == 1.0);
}

TEST_CASE("rk4 global error is fourth order") {
  auto f = [](double, const VectorXd& x) -> VectorXd { return -x; };
  auto err = [&](double h) {
    return std::abs(integrate(f, StepSpec{h, 0.0, 1.0}, VectorXd::Ones(1)).states.back()(0) -
                    std::exp(-1.0));
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("rk4 on a time-dependent field") {
  // x' = x / (1 + t), x(0) = 1 -> x = 1 + t
  auto f = [](double t, const VectorXd& x) -> VectorXd { return x / (1.0 + t); };
  const auto traj = integrate(f, StepSpec{0.01, 0.0, 10.0}, VectorXd::Ones(1));
  CHECK(std::abs(traj.states.back()(0) - 11.0) < 1e-6);
}

TEST_CASE("step grid") {
  const StepSpec spec{0.3, 0.0, 1.0};
  CHECK(spec.steps() == 4);
  CHECK_FALSE(spec.uniform());
  CHECK(spec.time(4) == 1.0);
  CHECK(spec.step_length(3) == doctest::Approx(0.1));
  CHECK(StepSpec{0.005, 0.0, 1500.0}.steps() == 300000);
  CHECK_THROWS_AS(StepSpec({-1.0, 0.0, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(StepSpec({0.1, 2.0, 1.0}).validate(), ConfigError);
}

TEST_CASE("non-finite stage reports the failing step") {
  auto f = [](double t, const VectorXd& x) -> VectorXd {
    return t > 0.25 ? VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()) : x;
  };
  try {
    (void)integrate(f, StepSpec{0.1, 0.0, 1.0}, VectorXd::Ones(1));
    FAIL("expected IntegrationFailure");
  } catch (const IntegrationFailure& e) {
    REQUIRE(e.step().has_value());
    CHECK(*e.step() == 2);
  }
}

TEST_CASE("modified Gram-Schmidt matches Householder") {
  SplitMix64 rng(7);
  for (auto [n, k] : {std::pair{5, 5}, std::pair{8, 3}, std::pair{18, 9}}) {
    const MatrixXd m = rng.gaussian_matrix(n, k);
    const auto f = modified_gram_schmidt(m);
    CHECK((f.q - householder_q(m)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.q * f.r - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(orthogonality_defect(f.q) < 1e-14);
    for (Eigen::Index j = 0; j < k; ++j) CHECK(f.r(j, j) > 0.0);
    CHECK(f.r.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0));
  }
}

TEST_CASE("modified Gram-Schmidt on a hand example") {
  MatrixXd m(2, 2);
  m << 3, 1, 4, 2;
  const auto f = modified_gram_schmidt(m);
  CHECK(f.r(0, 0) == doctest::Approx(5.0));
  CHECK(f.r(0, 1) == doctest::Approx(11.0 / 5.0));
  CHECK(f.r(1, 1) == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("rank deficiency is reported") {
  MatrixXd m(3, 2);
  m << 1, 2, 2, 4, 3, 6;
  try {
    (void)modified_gram_schmidt(m);
    FAIL("expected SingularMatrix");
  } catch (const SingularMatrix& e) {
    CHECK(e.column() == 1);
  }
}

TEST_CASE("projected step on a skew field is a rotation") {
  // For skew A the flow reduces to Q' = A Q, so Q(t) = exp(tA) Q0.
  const Eigen::Vector3d w(0.3, -0.7, 0.5);
  MatrixXd a(3, 3);
  a << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
  const MatrixXd q0 = random_orthogonal_frame(3, 3, 3);
  auto rhs = [&](double, const MatrixXd& q) -> MatrixXd { return reduced_qr_rhs(q, a); };
  MatrixXd q = q0;
  const double h = 0.01;
  for (int i = 0; i < 200; ++i) q = projected_matrix_step(rhs, i * h, q, h);
  CHECK((q - rotation(2.0 * w) * q0).cwiseAbs().maxCoeff() < 1e-10);
}

}  // TEST_SUITE
