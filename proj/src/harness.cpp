#include "dichotomy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "dichotomy/rng.hpp"

namespace dichotomy {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

ExperimentConfig ExperimentConfig::resolved(Command cmd) const {
  ExperimentConfig c = *this;
  if (c.tf == 0.0) c.tf = c.t0 + (cmd == Command::spectrum ? 1500.0 : 50.0);
  if (c.k == 0 && cmd != Command::verify) {
    const Eigen::Index dim = make_model(c.model, c.model_params()).n;
    c.k = cmd == Command::spectrum ? dim : std::min<Eigen::Index>(7, dim);
  }
  return c;
}

void ExperimentConfig::validate(Command cmd) const {
  if (std::find(model_tags().begin(), model_tags().end(), model) == model_tags().end())
    throw ConfigError("model", "unknown model tag '" + model + "'");
  if (model == "lorenz96" && n < 4) throw ConfigError("n", "Lorenz'96 needs n >= 4");
  step_spec().validate();
  if (burn_in < 0.0) throw ConfigError("burn-in", "must be non-negative");
  if (delta < 0.0) throw ConfigError("delta", "must be non-negative");
  if (runs < 1) throw ConfigError("runs", "must be at least 1");
  if (workers < 1) throw ConfigError("workers", "must be at least 1");
  if (g1_scale < 0.0) throw ConfigError("g1-scale", "must be non-negative");
  if (!(p1_scale > 0.0)) throw ConfigError("p1-scale", "must be positive");
  if (frame != "random" && frame != "identity")
    throw ConfigError("frame", "expected 'random' or 'identity'");
  if (initial != "sine" && initial != "random")
    throw ConfigError("initial", "expected 'sine' or 'random'");
  if (!(fit_begin >= 0.0 && fit_begin < fit_end && fit_end <= 1.0))
    throw ConfigError("fit-window", "fractions must satisfy 0 <= begin < end <= 1");
  if (cmd == Command::verify) return;

  const DynamicalModel m = make_model(model, model_params());
  if (model == "lorenz96" && (p < 1 || p > n))
    throw ConfigError("p", "measurement count must lie in [1, n]");
  if (k < 1 || k > m.n) throw ConfigError("k", "subspace dimension must lie in [1, n]");
  if (cmd == Command::spectrum) {
    if (windows.empty()) throw ConfigError("windows", "at least one window is required");
    for (double w : windows) {
      if (!(w > 0.0)) throw ConfigError("windows", "window lengths must be positive");
      if (w > tf - t0 - burn_in + 1e-9 * std::max(1.0, tf))
        throw ConfigError("windows", "window H=" + format_number(w) +
                                         " exceeds tf - t0 - burn-in");
    }
  }
  if (cmd == Command::ensemble && runs < 2)
    throw ConfigError("runs", "ensemble statistics need at least 2 runs");
}

Eigen::VectorXd initial_state(const ExperimentConfig& cfg, const DynamicalModel& model) {
  if (model.linear) return Eigen::VectorXd::Ones(model.n);
  if (cfg.initial == "sine") return sine_initial_condition(model.n);
  SplitMix64 rng(cfg.seed);
  Eigen::VectorXd x = rng.gaussian_matrix(model.n, 1);
  return x / x.norm();
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("out", "cannot write " + path.string());
  return os;
}

void write_row(std::ostream& os, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) os << ',';
    os << format_number(v);
    first = false;
  }
  os << '\n';
}

void write_run_csv(const fs::path& path, const RunLog& log) {
  auto os = open_csv(path);
  os << "t,error_norm,min_eig_p1,max_eig_p1\n";
  for (std::size_t i = 0; i < log.times.size(); ++i)
    write_row(os, {log.times[i], log.error_norm[i], log.min_eig[i], log.max_eig[i]});
}

/// One observer run: perturbation (n uniforms) then frame (n*k Gaussians) from `seed`.
RunLog observer_run(const ExperimentConfig& cfg, const DynamicalModel& model,
                    const Eigen::VectorXd& x0, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const Eigen::VectorXd x_hat = x0 + rng.uniform_vector(model.n, -cfg.delta, cfg.delta);
  const Eigen::MatrixXd frame =
      cfg.frame == "identity"
          ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(model.n, cfg.k))
          : modified_gram_schmidt(rng.gaussian_matrix(model.n, cfg.k)).q;
  const Eigen::MatrixXd p1 = cfg.p1_scale * Eigen::MatrixXd::Identity(cfg.k, cfg.k);
  const Eigen::MatrixXd g1 = cfg.g1_scale * Eigen::MatrixXd::Identity(cfg.k, cfg.k);
  ObserverState init = make_observer_state(model, cfg.t0, x_hat, frame, p1, g1);
  RunOptions opts;
  opts.check_every = cfg.check_every;
  opts.divergence_norm = cfg.divergence_norm;
  opts.log_every = cfg.log_every;
  return simulate_eso(model, x0, std::move(init), cfg.step_spec(), opts);
}

std::string run_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03d.csv", index);
  return buf;
}

}  // namespace

SpectrumResult cmd_spectrum(const ExperimentConfig& config) {
  const ExperimentConfig cfg = config.resolved(Command::spectrum);
  cfg.validate(Command::spectrum);
  const DynamicalModel model = make_model(cfg.model, cfg.model_params());
  const Eigen::VectorXd x0 = initial_state(cfg, model);
  const Eigen::MatrixXd frame0 =
      cfg.frame == "identity" ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(model.n, cfg.k))
                              : random_orthogonal_frame(model.n, cfg.k, cfg.seed);
  const SpectralRun run = evolve_spectral(model, x0, frame0, cfg.step_spec());

  SpectrumResult result;
  result.estimate = estimate_spectrum(run.record, cfg.windows, cfg.burn_in, cfg.threshold);
  result.csv = cfg.out / "spectrum.csv";
  auto os = open_csv(result.csv);
  os << "index,lyapunov";
  for (const auto& [w, _] : result.estimate.bohl)
    os << ",bohl_lo_" << format_number(w) << ",bohl_hi_" << format_number(w);
  os << '\n';
  for (Eigen::Index i = 0; i < result.estimate.lyapunov.size(); ++i) {
    os << (i + 1) << ',' << format_number(result.estimate.lyapunov(i));
    for (const auto& [w, intervals] : result.estimate.bohl) {
      const auto& iv = intervals[static_cast<std::size_t>(i)];
      os << ',' << format_number(iv.lower) << ',' << format_number(iv.upper);
    }
    os << '\n';
  }
  return result;
}

ObserveResult cmd_observe(const ExperimentConfig& config) {
  const ExperimentConfig cfg = config.resolved(Command::observe);
  cfg.validate(Command::observe);
  const DynamicalModel model = make_model(cfg.model, cfg.model_params());
  ObserveResult result;
  result.log = observer_run(cfg, model, initial_state(cfg, model), cfg.seed);
  result.csv = cfg.out / "run.csv";
  write_run_csv(result.csv, result.log);
  return result;
}

EnsembleSummary summarize_runs(const std::vector<RunLog>& logs, FitWindow fit,
                               double converge_tol) {
  EnsembleSummary s;
  s.fit = fit;
  const RunLog* longest = &logs.front();
  for (const auto& log : logs)
    if (log.times.size() > longest->times.size()) longest = &log;
  s.times = longest->times;
  const std::size_t samples = s.times.size();
  std::vector<double> column(logs.size());
  for (std::size_t j = 0; j < samples; ++j) {
    for (std::size_t r = 0; r < logs.size(); ++r)
      column[r] = j < logs[r].error_norm.size() ? logs[r].error_norm[j]
                                                : std::numeric_limits<double>::infinity();
    s.min.push_back(quantile(column, 0.0));
    s.median.push_back(quantile(column, 0.5));
    s.q80.push_back(quantile(column, 0.8));
    s.max.push_back(quantile(column, 1.0));
  }
  for (const auto& log : logs) {
    double rate = std::numeric_limits<double>::quiet_NaN();
    if (!log.failed) {
      try {
        rate = fit_decay_rate(log.times, log.error_norm, fit);
      } catch (const NumericalError&) {
      }
    }
    const double lowest = log.error_norm.empty()
                              ? std::numeric_limits<double>::infinity()
                              : *std::min_element(log.error_norm.begin(), log.error_norm.end());
    s.rates.push_back(rate);
    s.min_error.push_back(lowest);
    s.converged.push_back(!log.failed && lowest < converge_tol);
    s.failures.push_back(log.failure);
  }
  try {
    s.median_rate = fit_decay_rate(s.times, s.median, fit);
  } catch (const NumericalError&) {
    s.median_rate = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

EnsembleSummary cmd_ensemble(const ExperimentConfig& config) {
  const ExperimentConfig cfg = config.resolved(Command::ensemble);
  cfg.validate(Command::ensemble);
  const DynamicalModel model = make_model(cfg.model, cfg.model_params());
  const Eigen::VectorXd x0 = initial_state(cfg, model);

  std::vector<RunLog> logs(static_cast<std::size_t>(cfg.runs));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (int r = next++; r < cfg.runs; r = next++) {
      try {
        logs[static_cast<std::size_t>(r)] =
            observer_run(cfg, model, x0, cfg.seed + static_cast<std::uint64_t>(r));
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < std::min(cfg.workers, cfg.runs); ++w) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);

  const double horizon = cfg.tf - cfg.t0;
  const FitWindow fit{cfg.t0 + cfg.fit_begin * horizon, cfg.t0 + cfg.fit_end * horizon};
  EnsembleSummary s = summarize_runs(logs, fit, cfg.converge_tol);

  for (std::size_t r = 0; r < logs.size(); ++r)
    write_run_csv(cfg.out / run_file_name(static_cast<int>(r)), logs[r]);
  {
    auto os = open_csv(cfg.out / "ensemble.csv");
    os << "t,min,median,q80,max\n";
    for (std::size_t j = 0; j < s.times.size(); ++j)
      write_row(os, {s.times[j], s.min[j], s.median[j], s.q80[j], s.max[j]});
  }
  {
    auto os = open_csv(cfg.out / "rates.csv");
    os << "run,seed,fitted_rate,min_error,converged,failure\n";
    for (std::size_t r = 0; r < logs.size(); ++r)
      os << r << ',' << (cfg.seed + r) << ',' << format_number(s.rates[r]) << ','
         << format_number(s.min_error[r]) << ',' << (s.converged[r] ? 1 : 0) << ",\""
         << s.failures[r] << "\"\n";
  }
  {
    // Reference line anchored at the median at the start of the fit window.
    auto os = open_csv(cfg.out / "reference.csv");
    os << "t,reference\n";
    std::size_t anchor = 0;
    while (anchor + 1 < s.times.size() && s.times[anchor] < fit.begin) ++anchor;
    const double level = s.median.empty() ? 0.0 : s.median[anchor];
    for (double t : s.times)
      write_row(os, {t, level * std::exp(cfg.reference_rate * (t - s.times[anchor]))});
  }
  return s;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

void write_verify_report(std::ostream& os, const VerifyReport& report) {
  os << "check,status,value,tolerance\n";
  for (const auto& c : report.checks)
    os << c.check << ',' << (c.passed ? "pass" : "fail") << ',' << format_number(c.value) << ','
       << format_number(c.tolerance) << '\n';
}

VerifyReport cmd_verify(const ExperimentConfig& config) {
  const ExperimentConfig cfg = config.resolved(Command::verify);
  cfg.validate(Command::verify);
  VerifyReport report = run_verification(test_models(), cfg);
  auto os = open_csv(cfg.out / "verify.csv");
  write_verify_report(os, report);
  return report;
}

}  // namespace dichotomy
