#include <cmath>
#include <vector>

#include "doctest.h"
#include "dichotomy/models.hpp"
#include "dichotomy/rng.hpp"
#include "dichotomy/spectral.hpp"

using namespace dichotomy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Record of b(t) sampled on [0, T] with step h.
DiagonalRecord record_of(double (*b)(double), double h, double tf) {
  DiagonalRecord rec;
  const auto n = static_cast<std::size_t>(std::llround(tf / h)) + 1;
  rec.b.resize(1, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    rec.times.push_back(static_cast<double>(i) * h);
    rec.b(0, static_cast<Eigen::Index>(i)) = b(rec.times.back());
  }
  rec.accumulate();
  return rec;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("skew part, triangular part and tangency") {
  SplitMix64 rng(21);
  const MatrixXd a = rng.gaussian_matrix(6, 6);
  const MatrixXd q = random_orthogonal_frame(6, 4, 22);
  const MatrixXd s = skew_lower(q, a);
  CHECK((s + s.transpose()).isZero(0.0));
  CHECK(s.diagonal().isZero(0.0));
  const MatrixXd b = b1(q, a);
  CHECK(b.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0));
  const MatrixXd m = q.transpose() * a * q;
  CHECK((b + s - m).triangularView<Eigen::Upper>().toDenseMatrix().cwiseAbs().maxCoeff() < 1e-14);
  // Q^T Q' must be skew for the flow to preserve orthonormality.
  const MatrixXd r = reduced_qr_rhs(q, a);
  CHECK((q.transpose() * r + r.transpose() * q).cwiseAbs().maxCoeff() < 1e-13);
  // Same field as (I - QQ^T) A Q + Q S1.
  const MatrixXd direct = (MatrixXd::Identity(6, 6) - q * q.transpose()) * a * q + q * s;
  CHECK((r - direct).cwiseAbs().maxCoeff() < 1e-13);
  CHECK_THROWS_AS((void)reduced_qr_rhs(q, MatrixXd(rng.gaussian_matrix(5, 5))), DimensionMismatch);
}

TEST_CASE("frame validation") {
  CHECK_NOTHROW(SubspaceFrame(random_orthogonal_frame(5, 2, 1)));
  CHECK_THROWS_AS(SubspaceFrame(MatrixXd::Ones(3, 2)), DimensionMismatch);
  CHECK_THROWS_AS((void)random_orthogonal_frame(3, 4, 1), ConfigError);
  CHECK(random_orthogonal_frame(7, 3, 5) == random_orthogonal_frame(7, 3, 5));
}

TEST_CASE("flow matches the QR factorization of the fundamental matrix") {
  const DynamicalModel model = make_sinusoidal_ltv(4);
  const MatrixXd q0 = random_orthogonal_frame(4, 3, 8);
  const double tf = 3.0;
  const auto run = evolve_spectral(model, VectorXd::Ones(4), q0, StepSpec{1e-3, 0.0, tf});

  // Independent oracle: X' = A(t) X, X(0) = Q0, on a finer grid, then Householder QR.
  const VectorXd u = model.zero_input();
  auto rhs = [&](double t, const MatrixXd& x) -> MatrixXd {
    return model.jacobian(t, x.col(0), u) * x;
  };
  MatrixXd x = q0;
  const double h = 1e-4;
  for (int i = 0; i < 30000; ++i) x = rk4_step<MatrixXd>(rhs, i * h, x, h);
  const Eigen::HouseholderQR<MatrixXd> qr(x);
  MatrixXd q_ref = qr.householderQ() * MatrixXd::Identity(4, 3);
  const MatrixXd r = qr.matrixQR().topRows(3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double sign = r(j, j) < 0 ? -1.0 : 1.0;
    q_ref.col(j) *= sign;
    // ln R_jj(T) = integral of b_jj
    CHECK(run.record.cumulative(j, run.record.b.cols() - 1) ==
          doctest::Approx(std::log(sign * r(j, j))).epsilon(1e-6));
  }
  CHECK((run.frame.basis() - q_ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("diagonal LTI with identity frame is exact") {
  const auto run = evolve_spectral(make_diagonal_lti(), VectorXd::Ones(2),
                                   MatrixXd::Identity(2, 2), StepSpec{0.01, 0.0, 30.0});
  CHECK(run.record.b.row(0).isConstant(2.0, 0.0));
  CHECK(run.record.b.row(1).isConstant(-1.0, 0.0));
  const std::vector<double> windows{5.0, 10.0};
  const auto est = estimate_spectrum(run.record, windows, 2.0);
  CHECK(est.lyapunov(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(est.bohl.at(10.0)[1].upper == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(est.j_star == 1);
}

TEST_CASE("Bohl exponents of a linear ramp") {
  // b(t) = t on [0, 10]: H = 2 window averages are t0 + 1, trapezoid exact.
  const auto rec = record_of([](double t) { return t; }, 0.01, 10.0);
  const auto iv = bohl_exponents(rec, 2.0, 0.0).front();
  CHECK(iv.lower == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(iv.upper == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(lyapunov_exponents(rec, 0.0)(0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(lyapunov_exponents(rec, 4.0)(0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(bohl_exponents(rec, 2.0, 4.0).front().lower == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)bohl_exponents(rec, 11.0, 0.0), ConfigError);
  CHECK_THROWS_AS((void)bohl_exponents(rec, 0.0, 0.0), ConfigError);
}

TEST_CASE("Bohl exponents of the decaying scalar counterexample") {
  // b(t) = 1/(1+t): upper Bohl exponent ln(1+H)/H from the window at t0 = 0.
  const auto rec = record_of([](double t) { return 1.0 / (1.0 + t); }, 1e-3, 200.0);
  const auto iv = bohl_exponents(rec, 10.0, 0.0).front();
  CHECK(std::abs(iv.upper - std::log(11.0) / 10.0) < 1e-5);
  CHECK(std::abs(iv.lower - (std::log(201.0) - std::log(191.0)) / 10.0) < 1e-6);
}

TEST_CASE("Lyapunov exponent lies inside each Bohl interval") {
  const auto rec = record_of([](double t) { return std::sin(t) + 0.3 * std::cos(2.7 * t); },
                             0.01, 200.0);
  const double lam = lyapunov_exponents(rec, 0.0)(0);
  for (double h : {5.0, 10.0, 20.0, 40.0}) {
    const auto iv = bohl_exponents(rec, h, 0.0).front();
    CHECK(iv.lower <= lam);
    CHECK(lam <= iv.upper);
  }
  // Doubling the window cannot widen the interval.
  const auto fine = bohl_exponents(rec, 10.0, 0.0).front();
  const auto coarse = bohl_exponents(rec, 20.0, 0.0).front();
  CHECK(coarse.lower >= fine.lower);
  CHECK(coarse.upper <= fine.upper);
}

TEST_CASE("count of directions that are not uniformly stable") {
  const std::vector<double> upper{1.0, 0.5, -0.1, -0.3};
  CHECK(count_unstable(upper) == 2);
  CHECK(count_unstable(upper, 0.2) == 3);
  const std::vector<double> mixed{-1.0, 0.5, -0.3};
  CHECK(count_unstable(mixed) == 2);
  const std::vector<double> stable{-1.0, -2.0};
  CHECK(count_unstable(stable) == 0);
  const std::vector<double> zero{0.0};
  CHECK(count_unstable(zero) == 1);
}

TEST_CASE("estimate uses the longest window for j*") {
  const auto run = evolve_spectral(make_double_integrator(), VectorXd::Ones(2),
                                   MatrixXd::Identity(2, 2), StepSpec{0.01, 0.0, 50.0});
  const std::vector<double> windows{10.0, 20.0};
  const auto est = estimate_spectrum(run.record, windows, 0.0);
  CHECK(est.bohl.size() == 2);
  CHECK(est.j_star == 2);
  CHECK(est.upper(20.0).size() == 2);
}

}  // TEST_SUITE
