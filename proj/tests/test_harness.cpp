#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dichotomy/harness.hpp"

using namespace dichotomy;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dichotomy_tests_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_ensemble(const fs::path& out, int workers) {
  ExperimentConfig cfg;
  cfg.n = 8;
  cfg.p = 4;
  cfg.k = 4;
  cfg.tf = 5.0;
  cfg.runs = 3;
  cfg.workers = workers;
  cfg.log_every = 10;
  cfg.out = out;
  return cfg;
}

std::string config_error_field(const ExperimentConfig& cfg, Command cmd) {
  try {
    cfg.resolved(cmd).validate(cmd);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("quantiles interpolate linearly") {
  std::vector<double> v{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(quantile(v, 0.8) == doctest::Approx(8.2));
  CHECK(quantile(v, 0.5) == doctest::Approx(5.5));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 10.0);
  const std::vector<double> three{3, 1, 2};
  CHECK(quantile(three, 0.5) == 2.0);
  CHECK_THROWS_AS((void)quantile(three, 1.5), ConfigError);
  CHECK_THROWS_AS((void)quantile(std::vector<double>{}, 0.5), NumericalError);
}

TEST_CASE("quantiles are ordered, also with failed runs") {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> v{1e-3, inf, 2e-5, 7e-4, inf};
  double previous = -inf;
  for (double q : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    const double x = quantile(v, q);
    CHECK(x >= previous);
    previous = x;
  }
  CHECK(quantile(v, 0.5) == 1e-3);
  CHECK(quantile(v, 1.0) == inf);
}

TEST_CASE("decay rate fit") {
  std::vector<double> t, e;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.5 * i);
    e.push_back(std::max(2.0 * std::exp(-0.6 * t.back()), 1e-14));
  }
  // Samples at the floor (t > ~51) are excluded automatically.
  CHECK(fit_decay_rate(t, e, {0.0, 50.0}) == doctest::Approx(-0.6).epsilon(1e-10));
  CHECK(fit_decay_rate(t, e, {0.0, 100.0}) == doctest::Approx(-0.6).epsilon(1e-10));
  CHECK_THROWS_AS((void)fit_decay_rate(t, e, {0.0, 2.0}), NumericalError);
}

TEST_CASE("configuration validation names the field") {
  ExperimentConfig cfg;
  CHECK(config_error_field(cfg, Command::observe).empty());
  ExperimentConfig bad = cfg;
  bad.k = 19;
  CHECK(config_error_field(bad, Command::observe) == "k");
  bad = cfg;
  bad.delta = -1.0;
  CHECK(config_error_field(bad, Command::observe) == "delta");
  bad = cfg;
  bad.runs = 0;
  CHECK(config_error_field(bad, Command::observe) == "runs");
  bad = cfg;
  bad.tf = 500.0;
  CHECK(config_error_field(bad, Command::spectrum) == "windows");
  bad = cfg;
  bad.h = 0.0;
  CHECK(config_error_field(bad, Command::observe) == "h");
  bad = cfg;
  bad.model = "nope";
  CHECK(config_error_field(bad, Command::observe) == "model");
  bad = cfg;
  bad.p = 0;
  CHECK(config_error_field(bad, Command::observe) == "p");
}

TEST_CASE("command defaults") {
  const ExperimentConfig cfg;
  CHECK(cfg.resolved(Command::spectrum).k == 18);
  CHECK(cfg.resolved(Command::spectrum).tf == 1500.0);
  CHECK(cfg.resolved(Command::observe).k == 7);
  CHECK(cfg.resolved(Command::ensemble).tf == 50.0);
}

TEST_CASE("ensemble output is replayed bit for bit") {
  const fs::path a = scratch("replay_a"), b = scratch("replay_b");
  const auto sa = cmd_ensemble(small_ensemble(a, 1));
  const auto sb = cmd_ensemble(small_ensemble(b, 3));
  CHECK(sa.median == sb.median);
  for (const char* f : {"ensemble.csv", "rates.csv", "reference.csv", "run_000.csv", "run_002.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "ensemble.csv").rfind("t,min,median,q80,max\n", 0) == 0);
  // Distinct seeds give distinct members.
  CHECK(slurp(a / "run_000.csv") != slurp(a / "run_001.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("spectrum output") {
  const fs::path out = scratch("spectrum");
  ExperimentConfig cfg;
  cfg.model = "diag_lti";
  cfg.tf = 40.0;
  cfg.windows = {10.0, 20.0};
  cfg.out = out;
  const auto r = cmd_spectrum(cfg);
  std::istringstream csv(slurp(r.csv));
  std::string header, row1, row2;
  std::getline(csv, header);
  std::getline(csv, row1);
  std::getline(csv, row2);
  CHECK(header == "index,lyapunov,bohl_lo_10,bohl_hi_10,bohl_lo_20,bohl_hi_20");
  auto fields = [](const std::string& row) {
    std::vector<double> v;
    std::istringstream is(row);
    for (std::string cell; std::getline(is, cell, ',');) v.push_back(std::stod(cell));
    return v;
  };
  const auto r1 = fields(row1), r2 = fields(row2);
  REQUIRE(r1.size() == 6);
  REQUIRE(r2.size() == 6);
  CHECK(r1[0] == 1.0);
  CHECK(r2[0] == 2.0);
  for (std::size_t i = 1; i < 6; ++i) {
    CHECK(r1[i] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r2[i] == doctest::Approx(-1.0).epsilon(1e-12));
  }
  fs::remove_all(out);
}

TEST_CASE("summaries pad failed runs") {
  RunLog ok, failed;
  for (int i = 0; i < 20; ++i) {
    ok.times.push_back(i);
    ok.error_norm.push_back(std::exp(-0.5 * i));
  }
  failed.times = {0.0, 1.0};
  failed.error_norm = {1.0, 2.0};
  failed.failed = true;
  failed.failure = "estimation error diverged";
  const auto s = summarize_runs({ok, failed, ok}, {0.0, 19.0}, 1e-3);
  CHECK(s.times.size() == 20);
  CHECK(std::isinf(s.max.back()));
  CHECK(s.median.back() == ok.error_norm.back());
  CHECK(s.converged == std::vector<bool>{true, false, true});
  CHECK(std::isnan(s.rates[1]));
  CHECK(s.median_rate == doctest::Approx(-0.5));
}

TEST_CASE("verification flags a corrupted Jacobian") {
  ExperimentConfig cfg;
  const auto clean = run_verification(test_models(), cfg);
  CHECK(clean.passed());

  auto catalog = test_models();
  auto& model = catalog.front();
  const auto jac = model.jacobian;
  model.jacobian = [jac](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::MatrixXd j = jac(t, x, u);
    j(0, 0) += 1e-2;
    return j;
  };
  const auto report = run_verification(catalog, cfg);
  CHECK_FALSE(report.passed());
  bool flagged = false;
  for (const auto& c : report.checks)
    if (c.check == "jacobian_fd:" + model.tag) flagged = !c.passed;
  CHECK(flagged);
}

TEST_CASE("number formatting round-trips") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.0) == "-2");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

}  // TEST_SUITE
