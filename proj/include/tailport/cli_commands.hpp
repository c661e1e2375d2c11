#pragma once

// Command implementations behind the `tailport` tool. Each command returns the
// report and the auxiliary files it would write, so callers decide where they go.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailport/estimation.hpp"
#include "tailport/experiments.hpp"
#include "tailport/returns_io.hpp"
#include "tailport/tail_dependence.hpp"

namespace tailport {

extern const char* const kVersion;

struct CommandOutput {
  nlohmann::json report;                     // empty for table-only commands
  std::map<std::string, std::string> files;  // suffix -> content
};

struct ModelOptions {
  std::string model = "aparch11";
  double delta = 1.0;
  std::size_t ar = 0;  // arma-garch orders
  std::size_t ma = 0;
  std::size_t burn_in = 10;
  std::uint64_t seed = 7;  // restart perturbations of the optimizer

  ModelSpec spec() const;
};

struct TestOptions {
  ModelOptions model;
  std::size_t D = kDefaultLags;
  std::optional<std::size_t> k;  // default floor(rho n^0.99)
  double rho = kDefaultRho;
  double iota = kDefaultIota;
  std::vector<double> alphas = kDefaultAlphas;
  bool residuals_only = false;
  bool log_returns = false;
  bool k_sweep = false;
  double sweep_rho_min = 0.05;
  double sweep_rho_max = 0.15;
  bool lag_plot = false;
  std::size_t lag_plot_max = 20;
};

constexpr std::size_t kMinTestObservations = 200;

/// Fits the model (unless residuals_only), runs F, P and Ljung-Box. Files:
/// "k_sweep.csv" (statistics versus k with 5% critical values) and "lags.csv"
/// (lag estimates with null bands) when requested.
CommandOutput cmd_test(const ReturnsSeries& input, const std::string& input_digest, const TestOptions& options);

struct CvOptions {
  std::size_t D_max = 10;
  std::vector<double> alphas = kDefaultAlphas;
  BridgeSimConfig sim;
};

/// CSV with one row per alpha and one column per D, plus a JSON block recording the design.
CommandOutput cmd_cv(const CvOptions& options);

struct McOptions {
  ExperimentConfig config;
  bool dry_run = false;
};

/// Files: "table.csv", "vs_k.csv", "vs_D.csv", "summary.json" (also the report).
CommandOutput cmd_mc(const McOptions& options);

struct BacktestOptions {
  ModelOptions model;
  double split = 0.8;
  double theta = 0.01;
  std::size_t dq_lags = 4;
  bool log_returns = false;
};

/// Files: "forecasts.csv" (date, return, VaR, hit).
CommandOutput cmd_backtest(const ReturnsSeries& input, const std::string& input_digest,
                           const BacktestOptions& options);

struct SimulateOptions {
  std::string process = "garch";  // garch | aparch_x_size | aparch_x_power | garch_skewt_size | garch_skewt_power
  std::size_t n = 2000;
  std::uint64_t seed = 1;
  double omega = 0.05, alpha = 0.10, beta = 0.85;  // garch process
  std::string innovation = "normal";               // garch process: normal | t
  double nu = 4.1;
};

ReturnsSeries cmd_simulate(const SimulateOptions& options);

nlohmann::json to_json(const TailTestReport& r);
nlohmann::json to_json(const RejectionTable& t);

/// Option structs rebuilt from a report's "config" block.
TestOptions test_options_from_json(const nlohmann::json& config);
BacktestOptions backtest_options_from_json(const nlohmann::json& config);

}  // namespace tailport
