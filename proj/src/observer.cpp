#include "dichotomy/observer.hpp"

#include <algorithm>
#include <cmath>

namespace dichotomy {

namespace {

using Eigen::Index;
using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Offsets of the blocks of a packed (plant, estimate, Riccati, frame) state vector.
struct Layout {
  Index n = 0;
  Index k = 0;
  Index plant = 0;  // 0 or n
  Index x_hat = 0;
  Index p = 0;
  Index q = 0;
  Index size = 0;

  static Layout eso(Index n, Index k, bool with_plant) {
    Layout l;
    l.n = n;
    l.k = k;
    l.plant = with_plant ? n : 0;
    l.x_hat = l.plant;
    l.p = l.x_hat + n;
    l.q = l.p + k * k;
    l.size = l.q + n * k;
    return l;
  }
  static Layout ekbf(Index n, bool with_plant) {
    Layout l = eso(n, n, with_plant);
    l.size = l.q;  // no frame block
    return l;
  }
};

VectorXd pack_eso(const Layout& l, const VectorXd* x, const ObserverState& s) {
  VectorXd z(l.size);
  if (l.plant > 0) z.head(l.n) = *x;
  z.segment(l.x_hat, l.n) = s.x_hat;
  z.segment(l.p, l.k * l.k) = s.riccati.p1.reshaped();
  z.segment(l.q, l.n * l.k) = s.frame.basis().reshaped();
  return z;
}

/// Derivative of the coupled ESO system; `held_y` is used when the plant is absent.
VectorXd eso_field(const DynamicalModel& model, const Layout& l, const VectorXd& u,
                   const VectorXd* held_y, const MatrixXd& g1, double t, const VectorXd& z) {
  const auto x_hat = z.segment(l.x_hat, l.n);
  const Map<const MatrixXd> p1(z.data() + l.p, l.k, l.k);
  const Map<const MatrixXd> q(z.data() + l.q, l.n, l.k);
  const VectorXd xh = x_hat;
  const MatrixXd a = model.jacobian(t, xh, u);
  const MatrixXd c = model.output(t);
  const VectorXd y = l.plant > 0 ? VectorXd(c * z.head(l.n)) : *held_y;

  const MatrixXd aq = a * q;
  const MatrixXd m = q.transpose() * aq;
  const MatrixXd b = m - detail::skew_from_projection(m);
  const MatrixXd cq = c * q;
  const MatrixXd gain = q * (p1 * cq.transpose());

  VectorXd dz(l.size);
  if (l.plant > 0) dz.head(l.n) = model.f(t, z.head(l.n), u);
  dz.segment(l.x_hat, l.n) = model.f(t, xh, u) + gain * (y - c * xh);
  dz.segment(l.p, l.k * l.k) = riccati_rhs(b, cq, p1, g1).reshaped();
  dz.segment(l.q, l.n * l.k) = (aq - q * b).reshaped();
  return dz;
}

ObserverState unpack_eso(const DynamicalModel& model, const Layout& l, const VectorXd& z,
                         const MatrixXd& g1, double t) {
  MatrixXd q = Map<const MatrixXd>(z.data() + l.q, l.n, l.k);
  try {
    q = modified_gram_schmidt(q).q;
  } catch (const SingularMatrix& e) {
    throw FrameCollapse(t, e.column());
  }
  MatrixXd p1 = Map<const MatrixXd>(z.data() + l.p, l.k, l.k);
  p1 = 0.5 * (p1 + p1.transpose()).eval();
  return make_observer_state(model, t, z.segment(l.x_hat, l.n), std::move(q), std::move(p1), g1);
}

VectorXd ekbf_field(const DynamicalModel& model, const Layout& l, const VectorXd& u,
                    const VectorXd* held_y, const MatrixXd& g, double t, const VectorXd& z) {
  const VectorXd xh = z.segment(l.x_hat, l.n);
  const Map<const MatrixXd> p(z.data() + l.p, l.n, l.n);
  const MatrixXd a = model.jacobian(t, xh, u);
  const MatrixXd c = model.output(t);
  const VectorXd y = l.plant > 0 ? VectorXd(c * z.head(l.n)) : *held_y;

  VectorXd dz(l.size);
  if (l.plant > 0) dz.head(l.n) = model.f(t, z.head(l.n), u);
  dz.segment(l.x_hat, l.n) = model.f(t, xh, u) + p * (c.transpose() * (y - c * xh));
  dz.segment(l.p, l.n * l.n) = riccati_rhs(a, c, p, g).reshaped();
  return dz;
}

VectorXd pack_ekbf(const Layout& l, const VectorXd* x, const EkbfState& s) {
  VectorXd z(l.size);
  if (l.plant > 0) z.head(l.n) = *x;
  z.segment(l.x_hat, l.n) = s.x_hat;
  z.segment(l.p, l.n * l.n) = s.riccati.p.reshaped();
  return z;
}

EkbfState unpack_ekbf(const Layout& l, const VectorXd& z, const MatrixXd& g) {
  MatrixXd p = Map<const MatrixXd>(z.data() + l.p, l.n, l.n);
  p = 0.5 * (p + p.transpose()).eval();
  return {z.segment(l.x_hat, l.n), {std::move(p), g}};
}

void require_state_shapes(const DynamicalModel& model, const ObserverState& s) {
  const Index k = s.frame.dim();
  if (s.x_hat.size() != model.n || s.frame.ambient_dim() != model.n || s.riccati.p1.rows() != k ||
      s.riccati.p1.cols() != k || s.riccati.g1.rows() != k || s.riccati.g1.cols() != k)
    throw DimensionMismatch("observer state does not match model dimension");
}

std::pair<double, double> eig_extremes(const MatrixXd& p) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

}  // namespace

ObserverState make_observer_state(const DynamicalModel& model, double t, VectorXd x_hat,
                                  MatrixXd frame, MatrixXd p1, MatrixXd g1) {
  ObserverState s{std::move(x_hat), SubspaceFrame(std::move(frame)),
                  {std::move(p1), std::move(g1)}, {}};
  require_state_shapes(model, s);
  s.gain = observer_gain(s.frame, s.riccati.p1, model.output(t));
  return s;
}

void require_positive_definite(const MatrixXd& p, double t) {
  const Eigen::LLT<MatrixXd> llt(p);
  if (llt.info() != Eigen::Success || !p.allFinite()) throw DefinitenessLoss(t);
}

ObserverState eso_step(const DynamicalModel& model, const VectorXd& u, const VectorXd& y,
                       const ObserverState& state, double t, double h) {
  require_state_shapes(model, state);
  const Layout l = Layout::eso(model.n, state.frame.dim(), false);
  const MatrixXd& g1 = state.riccati.g1;
  auto field = [&](double s, const VectorXd& z) { return eso_field(model, l, u, &y, g1, s, z); };
  const VectorXd z = rk4_step<VectorXd>(field, t, pack_eso(l, nullptr, state), h);
  return unpack_eso(model, l, z, g1, t + h);
}

EsoPlantStep eso_step_with_plant(const DynamicalModel& model, const VectorXd& u,
                                 const VectorXd& x, const ObserverState& state, double t,
                                 double h) {
  require_state_shapes(model, state);
  const Layout l = Layout::eso(model.n, state.frame.dim(), true);
  const MatrixXd& g1 = state.riccati.g1;
  auto field = [&](double s, const VectorXd& z) {
    return eso_field(model, l, u, nullptr, g1, s, z);
  };
  const VectorXd z = rk4_step<VectorXd>(field, t, pack_eso(l, &x, state), h);
  return {z.head(model.n), unpack_eso(model, l, z, g1, t + h)};
}

EkbfState ekbf_step(const DynamicalModel& model, const VectorXd& u, const VectorXd& y,
                    const EkbfState& state, double t, double h) {
  const Layout l = Layout::ekbf(model.n, false);
  auto field = [&](double s, const VectorXd& z) {
    return ekbf_field(model, l, u, &y, state.riccati.g, s, z);
  };
  return unpack_ekbf(l, rk4_step<VectorXd>(field, t, pack_ekbf(l, nullptr, state), h),
                     state.riccati.g);
}

EkbfPlantStep ekbf_step_with_plant(const DynamicalModel& model, const VectorXd& u,
                                   const VectorXd& x, const EkbfState& state, double t,
                                   double h) {
  const Layout l = Layout::ekbf(model.n, true);
  auto field = [&](double s, const VectorXd& z) {
    return ekbf_field(model, l, u, nullptr, state.riccati.g, s, z);
  };
  const VectorXd z = rk4_step<VectorXd>(field, t, pack_ekbf(l, &x, state), h);
  return {z.head(model.n), unpack_ekbf(l, z, state.riccati.g)};
}

namespace {

template <class State, class Step, class Riccati>
RunLog simulate(const VectorXd& x0, State state,
                const StepSpec& spec, const RunOptions& opts, Step&& step, Riccati&& riccati) {
  spec.validate();
  RunLog log;
  VectorXd x = x0;
  const std::size_t steps = spec.steps();
  const std::size_t every = std::max<std::size_t>(1, opts.log_every);
  auto record = [&](double t) {
    const auto [lo, hi] = eig_extremes(riccati(state));
    log.times.push_back(t);
    log.error_norm.push_back((x - state.x_hat).norm());
    log.min_eig.push_back(lo);
    log.max_eig.push_back(hi);
    log.estimates.push_back(state.x_hat);
  };
  record(spec.time(0));
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = spec.time(i);
    const double t_next = spec.time(i + 1);
    try {
      auto next = step(x, state, t, spec.step_length(i));
      x = std::move(next.x);
      state = std::move(next.state);
      if (opts.check_every > 0 && (i + 1) % opts.check_every == 0)
        require_positive_definite(riccati(state), t_next);
      const double err = (x - state.x_hat).norm();
      if (!std::isfinite(err) || err > opts.divergence_norm) throw Divergence(t_next, err);
    } catch (const IntegrationFailure& e) {
      log.failed = true;
      log.failure = IntegrationFailure(e.time(), i).what();
      log.failure_time = e.time();
      log.exit_code = 2;
      return log;
    } catch (const NumericalError& e) {
      log.failed = true;
      log.failure = e.what();
      log.failure_time = t_next;
      log.exit_code = 2;
      return log;
    }
    if ((i + 1) % every == 0 || i + 1 == steps) record(t_next);
  }
  return log;
}

}  // namespace

RunLog simulate_eso(const DynamicalModel& model, const VectorXd& x0, ObserverState initial,
                    const StepSpec& spec, const RunOptions& opts) {
  const VectorXd u = model.zero_input();
  return simulate(
      x0, std::move(initial), spec, opts,
      [&](const VectorXd& x, const ObserverState& s, double t, double h) {
        return eso_step_with_plant(model, u, x, s, t, h);
      },
      [](const ObserverState& s) -> const MatrixXd& { return s.riccati.p1; });
}

RunLog simulate_ekbf(const DynamicalModel& model, const VectorXd& x0, EkbfState initial,
                     const StepSpec& spec, const RunOptions& opts) {
  const VectorXd u = model.zero_input();
  return simulate(
      x0, std::move(initial), spec, opts,
      [&](const VectorXd& x, const EkbfState& s, double t, double h) {
        return ekbf_step_with_plant(model, u, x, s, t, h);
      },
      [](const EkbfState& s) -> const MatrixXd& { return s.riccati.p; });
}

double full_riccati_projection_check(const DynamicalModel& model, const VectorXd& x0,
                                     const MatrixXd& square_frame, const MatrixXd& p1_initial,
                                     const MatrixXd& g1, const StepSpec& spec) {
  spec.validate();
  const Index n = model.n;
  const Index j = p1_initial.rows();
  if (square_frame.rows() != n || square_frame.cols() != n || p1_initial.cols() != j ||
      g1.rows() != j || g1.cols() != j || j > n || x0.size() != n)
    throw DimensionMismatch("projection check operands disagree on dimension");
  (void)SubspaceFrame(square_frame);

  const Index nx = model.linear ? 0 : n;
  const Index oq = nx, op = oq + n * n, op1 = op + n * n, size = op1 + j * j;
  const VectorXd u = model.zero_input();
  MatrixXd g_full = MatrixXd::Zero(n, n);
  g_full.topLeftCorner(j, j) = g1;
  MatrixXd p_full = MatrixXd::Zero(n, n);
  p_full.topLeftCorner(j, j) = p1_initial;

  VectorXd z(size);
  z.head(nx) = x0.head(nx);
  z.segment(oq, n * n) = square_frame.reshaped();
  z.segment(op, n * n) = p_full.reshaped();
  z.segment(op1, j * j) = p1_initial.reshaped();

  auto field = [&](double t, const VectorXd& s) -> VectorXd {
    const Map<const MatrixXd> q(s.data() + oq, n, n);
    const Map<const MatrixXd> p(s.data() + op, n, n);
    const Map<const MatrixXd> p1(s.data() + op1, j, j);
    const MatrixXd a = model.jacobian(t, model.linear ? x0 : VectorXd(s.head(n)), u);
    const MatrixXd c = model.output(t);
    const MatrixXd cq = c * q;
    const MatrixXd b = b1(q, a);
    VectorXd ds(size);
    if (nx > 0) ds.head(nx) = model.f(t, s.head(n), u);
    ds.segment(oq, n * n) = reduced_qr_rhs(q, a).reshaped();
    ds.segment(op, n * n) = riccati_rhs(b, cq, p, g_full).reshaped();
    // Reduced route: B1 from the leading j columns only.
    ds.segment(op1, j * j) = riccati_rhs(b1(q.leftCols(j), a), cq.leftCols(j), p1, g1).reshaped();
    return ds;
  };

  auto deviation = [&](const VectorXd& s) {
    MatrixXd embedded = MatrixXd::Zero(n, n);
    embedded.topLeftCorner(j, j) = Map<const MatrixXd>(s.data() + op1, j, j);
    return (Map<const MatrixXd>(s.data() + op, n, n) - embedded).norm();
  };

  double worst = deviation(z);
  for (std::size_t i = 0; i < spec.steps(); ++i) {
    z = rk4_step<VectorXd>(field, spec.time(i), z, spec.step_length(i));
    Map<MatrixXd> q(z.data() + oq, n, n);
    try {
      q = modified_gram_schmidt(q).q;
    } catch (const SingularMatrix& e) {
      throw FrameCollapse(spec.time(i + 1), e.column());
    }
    Map<MatrixXd> p(z.data() + op, n, n);
    p = 0.5 * (p + p.transpose()).eval();
    Map<MatrixXd> p1(z.data() + op1, j, j);
    p1 = 0.5 * (p1 + p1.transpose()).eval();
    worst = std::max(worst, deviation(z));
  }
  return worst;
}

AssumptionReport assumption_probe(const DynamicalModel& model, const Trajectory& samples,
                                  const RunLog& run) {
  AssumptionReport report;
  const VectorXd u = model.zero_input();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const MatrixXd a = model.jacobian(samples.times[s], samples.states[s], u);
    const Eigen::JacobiSVD<MatrixXd> svd(a);
    report.jacobian_norm_sup = std::max(report.jacobian_norm_sup, svd.singularValues()(0));
  }
  if (!run.min_eig.empty()) {
    report.min_eig_p1 = *std::min_element(run.min_eig.begin(), run.min_eig.end());
    report.max_eig_p1 = *std::max_element(run.max_eig.begin(), run.max_eig.end());
  }
  if (model.hessian_bound) {
    report.kappa = *model.hessian_bound;
    report.kappa_exact = true;
    return report;
  }
  // Central differences of the Jacobian on at most 50 evenly spaced samples.
  constexpr double eps = 1e-5;
  const std::size_t stride = std::max<std::size_t>(1, samples.size() / 50);
  const Index n = model.n;
  for (std::size_t s = 0; s < samples.size(); s += stride) {
    const double t = samples.times[s];
    std::vector<MatrixXd> hess(static_cast<std::size_t>(n), MatrixXd::Zero(n, n));
    for (Index l = 0; l < n; ++l) {
      VectorXd xp = samples.states[s], xm = samples.states[s];
      xp(l) += eps;
      xm(l) -= eps;
      const MatrixXd dj = (model.jacobian(t, xp, u) - model.jacobian(t, xm, u)) / (2.0 * eps);
      for (Index i = 0; i < n; ++i) hess[static_cast<std::size_t>(i)].col(l) = dj.row(i).transpose();
    }
    for (const auto& hm : hess) {
      const MatrixXd sym = 0.5 * (hm + hm.transpose());
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
      report.kappa = std::max(report.kappa, 0.5 * eig.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  return report;
}

}  // namespace dichotomy
