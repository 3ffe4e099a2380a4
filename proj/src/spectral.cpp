#include "dichotomy/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dichotomy/rng.hpp"

namespace dichotomy {

SubspaceFrame::SubspaceFrame(Eigen::MatrixXd basis, double tol) : basis_(std::move(basis)) {
  if (basis_.cols() < 1 || basis_.cols() > basis_.rows())
    throw DimensionMismatch("frame must be n x k with 1 <= k <= n");
  if (orthogonality_defect(basis_) > tol)
    throw DimensionMismatch("frame columns are not orthonormal");
}

Eigen::MatrixXd random_orthogonal_frame(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  if (k < 1 || k > n) throw ConfigError("k", "subspace dimension must lie in [1, n]");
  SplitMix64 rng(seed);
  return modified_gram_schmidt(rng.gaussian_matrix(n, k)).q;
}

void DiagonalRecord::accumulate() {
  cumulative.setZero(b.rows(), b.cols());
  for (Eigen::Index j = 1; j < b.cols(); ++j) {
    const double dt = times[j] - times[j - 1];
    cumulative.col(j) = cumulative.col(j - 1) + 0.5 * dt * (b.col(j - 1) + b.col(j));
  }
}

SpectralRun evolve_spectral(const DynamicalModel& model, const Eigen::VectorXd& x0,
                            const Eigen::MatrixXd& frame0, const StepSpec& spec) {
  spec.validate();
  const Eigen::Index n = model.n;
  const Eigen::Index k = frame0.cols();
  if (frame0.rows() != n || x0.size() != n)
    throw DimensionMismatch("initial state or frame does not match model dimension");
  const SubspaceFrame checked(frame0);

  // Packed state: [x (nonlinear models only); vec(Q)].
  const Eigen::Index nx = model.linear ? 0 : n;
  const Eigen::VectorXd u = model.zero_input();
  Eigen::VectorXd z(nx + n * k);
  z.head(nx) = x0.head(nx);
  z.tail(n * k) = frame0.reshaped();

  auto coefficient = [&](double t, const Eigen::VectorXd& packed) {
    return model.linear ? model.jacobian(t, x0, u)
                        : model.jacobian(t, packed.head(n), u);
  };
  auto field = [&](double t, const Eigen::VectorXd& packed) -> Eigen::VectorXd {
    const Eigen::Map<const Eigen::MatrixXd> q(packed.data() + nx, n, k);
    const Eigen::MatrixXd a = coefficient(t, packed);
    Eigen::VectorXd dz(packed.size());
    if (nx > 0) dz.head(nx) = model.f(t, packed.head(n), u);
    dz.tail(n * k) = reduced_qr_rhs(q, a).reshaped();
    return dz;
  };

  const std::size_t steps = spec.steps();
  SpectralRun run;
  DiagonalRecord& rec = run.record;
  rec.times.resize(steps + 1);
  rec.b.resize(k, static_cast<Eigen::Index>(steps + 1));

  auto sample = [&](std::size_t j, double t) {
    const Eigen::Map<const Eigen::MatrixXd> q(z.data() + nx, n, k);
    const Eigen::MatrixXd aq = coefficient(t, z) * q;
    rec.times[j] = t;
    rec.b.col(static_cast<Eigen::Index>(j)) = q.cwiseProduct(aq).colwise().sum().transpose();
  };

  sample(0, spec.time(0));
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = spec.time(i);
    try {
      z = rk4_step<Eigen::VectorXd>(field, t, z, spec.step_length(i));
    } catch (const IntegrationFailure& e) {
      throw IntegrationFailure(e.time(), i);
    }
    Eigen::Map<Eigen::MatrixXd> q(z.data() + nx, n, k);
    try {
      q = modified_gram_schmidt(q).q;
    } catch (const SingularMatrix& e) {
      throw FrameCollapse(spec.time(i + 1), e.column());
    }
    sample(i + 1, spec.time(i + 1));
  }
  rec.accumulate();

  run.frame = SubspaceFrame(Eigen::Map<const Eigen::MatrixXd>(z.data() + nx, n, k));
  run.final_state = model.linear ? x0 : Eigen::VectorXd(z.head(n));
  return run;
}

namespace {

std::size_t first_index_at_or_after(const std::vector<double>& times, double t) {
  const double slack = 1e-9 * std::max(1.0, std::abs(t));
  const auto it = std::lower_bound(times.begin(), times.end(), t - slack);
  return static_cast<std::size_t>(it - times.begin());
}

}  // namespace

Eigen::VectorXd lyapunov_exponents(const DiagonalRecord& rec, double burn_in) {
  if (rec.samples() < 2) throw NumericalError("diagonal record is empty");
  const std::size_t start = first_index_at_or_after(rec.times, rec.times.front() + burn_in);
  const std::size_t last = rec.samples() - 1;
  if (start >= last)
    throw NumericalError("burn-in leaves an empty averaging window");
  const double span = rec.times[last] - rec.times[start];
  return (rec.cumulative.col(static_cast<Eigen::Index>(last)) -
          rec.cumulative.col(static_cast<Eigen::Index>(start))) /
         span;
}

std::vector<BohlInterval> bohl_exponents(const DiagonalRecord& rec, double window,
                                         double burn_in) {
  if (rec.samples() < 2) throw NumericalError("diagonal record is empty");
  if (!(window > 0.0)) throw ConfigError("windows", "window length must be positive");
  const double h = rec.times[1] - rec.times[0];
  const auto width = static_cast<std::size_t>(std::llround(window / h));
  const std::size_t start = first_index_at_or_after(rec.times, rec.times.front() + burn_in);
  const std::size_t last = rec.samples() - 1;
  if (width == 0 || start + width > last)
    throw ConfigError("windows", "window H=" + std::to_string(window) +
                                     " is longer than the usable horizon");

  const Eigen::Index k = rec.directions();
  std::vector<BohlInterval> out(static_cast<std::size_t>(k),
                                {std::numeric_limits<double>::infinity(),
                                 -std::numeric_limits<double>::infinity()});
  for (std::size_t j = start; j + width <= last; ++j) {
    const auto a = static_cast<Eigen::Index>(j), b = static_cast<Eigen::Index>(j + width);
    const double span = rec.times[j + width] - rec.times[j];
    for (Eigen::Index i = 0; i < k; ++i) {
      const double avg = (rec.cumulative(i, b) - rec.cumulative(i, a)) / span;
      auto& iv = out[static_cast<std::size_t>(i)];
      iv.lower = std::min(iv.lower, avg);
      iv.upper = std::max(iv.upper, avg);
    }
  }
  return out;
}

int count_unstable(std::span<const double> upper, double threshold) {
  int j = static_cast<int>(upper.size());
  while (j > 0 && upper[static_cast<std::size_t>(j - 1)] < -threshold) --j;
  return j;
}

std::vector<double> SpectralEstimate::upper(double window) const {
  std::vector<double> out;
  for (const auto& iv : bohl.at(window)) out.push_back(iv.upper);
  return out;
}

SpectralEstimate estimate_spectrum(const DiagonalRecord& rec, std::span<const double> windows,
                                   double burn_in, double threshold) {
  SpectralEstimate est;
  est.lyapunov = lyapunov_exponents(rec, burn_in);
  est.threshold = threshold;
  for (double h : windows) est.bohl[h] = bohl_exponents(rec, h, burn_in);
  if (!est.bohl.empty()) {
    const auto upper = est.upper(est.bohl.rbegin()->first);
    est.j_star = count_unstable(upper, threshold);
  } else {
    std::vector<double> lam(est.lyapunov.data(), est.lyapunov.data() + est.lyapunov.size());
    est.j_star = count_unstable(lam, threshold);
  }
  return est;
}

}  // namespace dichotomy
