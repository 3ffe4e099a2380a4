#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dichotomy/models.hpp"
#include "dichotomy/observer.hpp"
#include "dichotomy/spectral.hpp"
#include "dichotomy/stats.hpp"

namespace dichotomy {

enum class Command { spectrum, observe, ensemble, verify };

struct ExperimentConfig {
  std::string model = "lorenz96";
  Eigen::Index n = 18;
  double forcing = 8.0;
  Eigen::Index p = 5;
  /// 0 selects the command default: the model dimension for `spectrum`, min(7, n) otherwise.
  Eigen::Index k = 0;
  double h = 0.005;
  double t0 = 0.0;
  /// 0 selects the command default: 1500 for `spectrum`, 50 otherwise.
  double tf = 0.0;
  double burn_in = 10.0;
  std::vector<double> windows{300.0, 800.0};
  std::uint64_t seed = 1;
  int runs = 10;
  double delta = 1e-3;
  double g1_scale = 10.0;
  double p1_scale = 1.0;
  std::filesystem::path out = ".";
  /// Upper Bohl exponents count as negative only below -threshold.
  double threshold = 0.0;
  std::string frame = "random";    // random | identity
  std::string initial = "sine";    // sine | random (unit sphere)
  int workers = 1;
  std::size_t log_every = 1;
  std::size_t check_every = 100;
  /// Fit window as fractions of the run horizon.
  double fit_begin = 0.2;
  double fit_end = 0.8;
  /// Slope of the reference decay line written next to the ensemble statistics.
  double reference_rate = -0.276;
  double converge_tol = 1e-8;
  double divergence_norm = 1e6;
  /// Random-initial-condition Bohl sign check in `verify`; 0 skips it.
  int random_ic_runs = 0;
  double random_ic_tf = 1000.0;
  double random_ic_window = 800.0;

  /// Copy with command defaults filled in.
  [[nodiscard]] ExperimentConfig resolved(Command cmd) const;
  /// Throws ConfigError naming the offending field.
  void validate(Command cmd) const;
  [[nodiscard]] StepSpec step_spec() const { return {h, t0, tf}; }
  [[nodiscard]] ModelParams model_params() const { return {n, forcing, p, seed}; }
};

/// Initial state for the configured model (sampled sine or seeded unit-sphere condition);
/// linear models start from the all-ones vector.
[[nodiscard]] Eigen::VectorXd initial_state(const ExperimentConfig& cfg, const DynamicalModel& model);

struct SpectrumResult {
  SpectralEstimate estimate;
  std::filesystem::path csv;
};

/// Writes <out>/spectrum.csv: index,lyapunov,bohl_lo_<H>,bohl_hi_<H>,...
SpectrumResult cmd_spectrum(const ExperimentConfig& cfg);

struct ObserveResult {
  RunLog log;
  std::filesystem::path csv;
};

/// Single ESO run; writes <out>/run.csv: t,error_norm,min_eig_p1,max_eig_p1.
ObserveResult cmd_observe(const ExperimentConfig& cfg);

struct EnsembleSummary {
  std::vector<double> times;
  std::vector<double> min;
  std::vector<double> median;
  std::vector<double> q80;
  std::vector<double> max;
  /// Per-run least-squares decay rates (NaN when the fit was impossible).
  std::vector<double> rates;
  std::vector<bool> converged;
  std::vector<std::string> failures;
  /// Smallest error norm reached by each run.
  std::vector<double> min_error;
  double median_rate = 0.0;
  FitWindow fit;
};

/// N seeded runs (seed = base + index); writes ensemble.csv (t,min,median,q80,max),
/// run_<i>.csv, rates.csv and reference.csv.
EnsembleSummary cmd_ensemble(const ExperimentConfig& cfg);

/// Pointwise statistics of equally sampled error series.
[[nodiscard]] EnsembleSummary summarize_runs(const std::vector<RunLog>& logs, FitWindow fit,
                                             double converge_tol);

struct CheckResult {
  std::string check;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  [[nodiscard]] bool passed() const;
};

/// Runs the invariant suites over `catalog` (Jacobian, containment, ground truth, ...).
[[nodiscard]] VerifyReport run_verification(const std::vector<DynamicalModel>& catalog,
                                            const ExperimentConfig& cfg);

/// Verification over the bundled catalog plus Lorenz'96; writes <out>/verify.csv.
VerifyReport cmd_verify(const ExperimentConfig& cfg);

void write_verify_report(std::ostream& os, const VerifyReport& report);

/// Shortest round-trip decimal form.
[[nodiscard]] std::string format_number(double x);

}  // namespace dichotomy
