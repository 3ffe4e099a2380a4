// dichotomy: spectral detectability analysis and subspace observer experiments.
//
//   dichotomy spectrum --model lorenz96 --k 9 --windows 300,800
//   dichotomy observe  --k 7 --delta 1e-3 --out runs/k7
//   dichotomy ensemble --k 7 --runs 10 --workers 4
//   dichotomy verify
//
// Options may also come from a key=value file given with --config; flags override it.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 verification failure.

#include <cmath>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "dichotomy/harness.hpp"

namespace {

using dichotomy::Command;
using dichotomy::ExperimentConfig;
using dichotomy::format_number;

constexpr int kConfigError = 1;
constexpr int kNumericalFailure = 2;
constexpr int kVerificationFailure = 3;

void add_options(CLI::App& app, ExperimentConfig& cfg) {
  app.add_option("--model", cfg.model, "Model tag")
      ->check(CLI::IsMember(dichotomy::model_tags()));
  app.add_option("--n", cfg.n, "Lorenz'96 dimension");
  app.add_option("--forcing", cfg.forcing, "Lorenz'96 forcing F");
  app.add_option("--p", cfg.p, "Number of measured states");
  app.add_option("--k", cfg.k, "Subspace dimension (0: command default)");
  app.add_option("--h", cfg.h, "Integration step");
  app.add_option("--t0", cfg.t0, "Start time");
  app.add_option("--tf", cfg.tf, "Final time (0: command default)");
  app.add_option("--burn-in", cfg.burn_in, "Transient discarded before averaging");
  app.add_option("--windows", cfg.windows, "Bohl window lengths, e.g. 300,800")->delimiter(',');
  app.add_option("--seed", cfg.seed, "Base seed");
  app.add_option("--runs", cfg.runs, "Ensemble size");
  app.add_option("--delta", cfg.delta, "Initial perturbation half-width");
  app.add_option("--g1-scale", cfg.g1_scale, "Riccati forcing G1 = g I");
  app.add_option("--p1-scale", cfg.p1_scale, "Riccati initial value P1(0) = s I");
  app.add_option("--out", cfg.out, "Output directory");
  app.add_option("--threshold", cfg.threshold, "Margin below zero for stable upper Bohl exponents");
  app.add_option("--frame", cfg.frame, "Initial frame: random | identity");
  app.add_option("--initial", cfg.initial, "Initial condition: sine | random");
  app.add_option("--workers", cfg.workers, "Concurrent ensemble members");
  app.add_option("--log-every", cfg.log_every, "Record every n-th step");
  app.add_option("--check-every", cfg.check_every, "Positive-definiteness probe cadence");
  app.add_option("--fit-begin", cfg.fit_begin, "Fit window start (fraction of horizon)");
  app.add_option("--fit-end", cfg.fit_end, "Fit window end (fraction of horizon)");
  app.add_option("--reference-rate", cfg.reference_rate, "Slope of the reference decay line");
  app.add_option("--converge-tol", cfg.converge_tol, "Error norm counted as converged");
  app.add_option("--random-ic-runs", cfg.random_ic_runs,
                 "verify: runs of the random initial condition Bohl sign check");
  app.add_option("--random-ic-tf", cfg.random_ic_tf, "verify: horizon of those runs");
}

int print_spectrum(const ExperimentConfig& cfg) {
  const auto result = dichotomy::cmd_spectrum(cfg);
  const auto& est = result.estimate;
  std::cout << "lyapunov:";
  for (Eigen::Index i = 0; i < est.lyapunov.size(); ++i)
    std::cout << ' ' << format_number(std::round(est.lyapunov(i) * 1e4) / 1e4);
  std::cout << '\n';
  for (const auto& [w, intervals] : est.bohl) {
    std::cout << "upper bohl H=" << format_number(w) << ':';
    for (const auto& iv : intervals) std::cout << ' ' << format_number(std::round(iv.upper * 1e4) / 1e4);
    std::cout << '\n';
  }
  std::cout << "j* = " << est.j_star << " (threshold " << format_number(est.threshold) << ")\n";
  std::cout << "wrote " << result.csv.string() << '\n';
  return 0;
}

int print_observe(const ExperimentConfig& cfg) {
  const auto result = dichotomy::cmd_observe(cfg);
  const auto& log = result.log;
  std::cout << "final error norm: " << format_number(log.error_norm.back()) << " at t="
            << format_number(log.times.back()) << '\n';
  std::cout << "wrote " << result.csv.string() << '\n';
  if (log.failed) {
    std::cerr << "run failed at t=" << format_number(log.failure_time) << ": " << log.failure << '\n';
    return kNumericalFailure;
  }
  return 0;
}

int print_ensemble(const ExperimentConfig& cfg) {
  const auto s = dichotomy::cmd_ensemble(cfg);
  std::size_t converged = 0, failed = 0;
  for (std::size_t r = 0; r < s.converged.size(); ++r) {
    converged += s.converged[r] ? 1 : 0;
    failed += s.failures[r].empty() ? 0 : 1;
  }
  std::cout << "runs: " << s.converged.size() << ", converged: " << converged
            << ", failed: " << failed << '\n';
  std::cout << "median decay rate on [" << format_number(s.fit.begin) << ", "
            << format_number(s.fit.end) << "]: " << format_number(s.median_rate) << '\n';
  std::cout << "wrote " << (cfg.out / "ensemble.csv").string() << '\n';
  return 0;
}

int print_verify(const ExperimentConfig& cfg) {
  const auto report = dichotomy::cmd_verify(cfg);
  dichotomy::write_verify_report(std::cout, report);
  return report.passed() ? 0 : kVerificationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dichotomy-spectrum detectability analysis and subspace observers"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");
  ExperimentConfig cfg;
  add_options(app, cfg);
  auto* spectrum = app.add_subcommand("spectrum", "Lyapunov and Bohl spectral intervals");
  auto* observe = app.add_subcommand("observe", "Single extended subspace observer run");
  auto* ensemble = app.add_subcommand("ensemble", "Seeded observer ensemble with statistics");
  auto* verify = app.add_subcommand("verify", "Invariant and consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (spectrum->parsed()) return print_spectrum(cfg);
    if (observe->parsed()) return print_observe(cfg);
    if (ensemble->parsed()) return print_ensemble(cfg);
    if (verify->parsed()) return print_verify(cfg);
  } catch (const dichotomy::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const dichotomy::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const dichotomy::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
