// tailport: specification tests for extremal serial dependence in model residuals.
//
// Exit codes: 0 ran, 1 usage error, 2 data error, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tailport/cli_commands.hpp"
#include "tailport/error.hpp"
#include "tailport/returns_io.hpp"

namespace fs = std::filesystem;
using namespace tailport;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_bandwidth:
    case ErrorKind::invalid_lag:
    case ErrorKind::domain:
    case ErrorKind::capacity:
      return 1;
    case ErrorKind::data:
    case ErrorKind::parse:
    case ErrorKind::degenerate_data:
      return 2;
    case ErrorKind::fit_failed:
    case ErrorKind::internal:
      return 3;
  }
  return 3;
}

// Writes the report and side files next to `prefix` (or the report to stdout).
void emit(const CommandOutput& out, const std::string& prefix) {
  if (prefix.empty()) {
    if (!out.report.is_null()) std::cout << out.report.dump(2) << "\n";
    for (const auto& [name, content] : out.files)
      if (name == "cv.csv") std::cout << content;
    return;
  }
  const fs::path base(prefix);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  if (!out.report.is_null()) write_file(prefix + ".json", out.report.dump(2) + "\n");
  for (const auto& [name, content] : out.files) write_file(prefix + "_" + name, content);
}

void add_model_flags(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--model", m.model, "aparch11 | garch11 | arma-garch")
      ->check(CLI::IsMember({"aparch11", "garch11", "arma-garch"}));
  cmd->add_option("--delta", m.delta, "APARCH power (fixed)")->check(CLI::PositiveNumber);
  cmd->add_option("--arma-orders", m.ar, "AR order for arma-garch");
  cmd->add_option("--ma-order", m.ma, "MA order for arma-garch");
  cmd->add_option("--burn-in", m.burn_in, "residuals discarded after fitting");
  cmd->add_option("--fit-seed", m.seed, "seed for optimizer restarts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailport: tail-copula portmanteau tests for standardized residuals"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  unsigned jobs = 0;
  app.add_option("--jobs", jobs, "worker cap for simulation and Monte Carlo work (0: all cores)");

  // test
  auto* test = app.add_subcommand("test", "fit a volatility model and test its residuals");
  TestOptions topt;
  std::string test_input, test_out, test_config;
  std::size_t k_value = 0;
  test->add_option("input", test_input, "CSV with header date,value");
  test->add_option("--config", test_config, "replay the config block of an earlier report");
  add_model_flags(test, topt.model);
  test->add_option("--lags,-D", topt.D, "lag horizon D");
  test->add_option("-k,--k", k_value, "bandwidth k (default floor(rho n^0.99))");
  test->add_option("--rho", topt.rho, "rho in the default bandwidth rule");
  test->add_option("--iota", topt.iota, "trimming constant of the functional test");
  test->add_option("--alpha", topt.alphas, "significance levels")->delimiter(',');
  test->add_flag("--residuals-only", topt.residuals_only, "input already holds residuals; skip fitting");
  test->add_flag("--log-returns", topt.log_returns, "input holds prices; convert to log returns");
  test->add_flag("--k-sweep", topt.k_sweep, "emit statistics as functions of k");
  test->add_option("--sweep-rho", topt.sweep_rho_min, "lower rho of the k sweep");
  test->add_option("--sweep-rho-max", topt.sweep_rho_max, "upper rho of the k sweep");
  test->add_flag("--lag-plot", topt.lag_plot, "emit lag estimates with null bands");
  test->add_option("--lag-plot-max", topt.lag_plot_max, "largest lag in the lag plot");
  test->add_option("--out,-o", test_out, "output prefix (report to stdout when absent)");

  // cv
  auto* cv = app.add_subcommand("cv", "simulate critical values of the functional limit");
  CvOptions copt;
  std::string cv_out;
  cv->add_option("--D-max", copt.D_max, "largest lag horizon");
  cv->add_option("--alpha", copt.alphas, "significance levels")->delimiter(',');
  cv->add_option("--iota", copt.sim.iota, "trimming constant");
  cv->add_option("--reps", copt.sim.reps, "replications (>= 1000)");
  cv->add_option("--grid", copt.sim.grid_points, "grid intervals per path (>= 1000)");
  cv->add_option("--seed", copt.sim.seed, "master seed");
  cv->add_option("--out,-o", cv_out, "output prefix (CSV to stdout when absent)");

  // mc
  auto* mc = app.add_subcommand("mc", "run a Monte Carlo size/power experiment");
  McOptions mopt;
  std::string mc_config, mc_out;
  bool resume = false;
  mc->add_option("config", mc_config, "key = value experiment file")->required();
  mc->add_flag("--dry-run", mopt.dry_run, "print the replication plan only");
  mc->add_flag("--resume", resume, "reuse records from the checkpoint file");
  mc->add_option("--out,-o", mc_out, "output prefix");

  // backtest
  auto* bt = app.add_subcommand("backtest", "VaR forecasts and DQ backtest");
  BacktestOptions bopt;
  std::string bt_input, bt_out, bt_config;
  bt->add_option("input", bt_input, "CSV with header date,value");
  bt->add_option("--config", bt_config, "replay the config block of an earlier report");
  add_model_flags(bt, bopt.model);
  bt->add_option("--split", bopt.split, "in-sample fraction in (0.5, 0.95)");
  bt->add_option("--theta", bopt.theta, "VaR level");
  bt->add_option("--dq-lags", bopt.dq_lags, "lagged hits in the DQ regression");
  bt->add_flag("--log-returns", bopt.log_returns, "input holds prices; convert to log returns");
  bt->add_option("--out,-o", bt_out, "output prefix (report to stdout when absent)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "write a simulated return series");
  SimulateOptions sopt;
  std::string sim_out;
  sim->add_option("--process", sopt.process,
                  "garch | aparch_x_size | aparch_x_power | garch_skewt_size | garch_skewt_power");
  sim->add_option("-n", sopt.n, "observations");
  sim->add_option("--seed", sopt.seed, "seed");
  sim->add_option("--omega", sopt.omega);
  sim->add_option("--alpha", sopt.alpha);
  sim->add_option("--beta", sopt.beta);
  sim->add_option("--innovation", sopt.innovation, "normal | t");
  sim->add_option("--nu", sopt.nu, "t degrees of freedom");
  sim->add_option("--out,-o", sim_out, "output CSV (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*test) {
      if (!test_config.empty()) {
        const auto rep = nlohmann::json::parse(read_file(test_config));
        topt = test_options_from_json(rep.at("config"));
        if (test_input.empty()) test_input = rep.at("input").value("path", std::string{});
      } else if (k_value > 0) {
        topt.k = k_value;
      }
      if (test_input.empty()) throw DomainError("test: input file required");
      const std::string bytes = read_file(test_input);
      auto out = cmd_test(parse_returns_csv(bytes), fnv1a_hex(bytes), topt);
      out.report["input"]["path"] = test_input;
      emit(out, test_out);
    } else if (*cv) {
      copt.sim.jobs = jobs;
      emit(cmd_cv(copt), cv_out);
    } else if (*mc) {
      mopt.config = parse_experiment_config(read_file(mc_config));
      mopt.config.jobs = jobs;
      mopt.config.resume = resume;
      auto out = cmd_mc(mopt);
      if (mopt.dry_run) {
        std::cout << out.report["plan"].get<std::string>();
        return 0;
      }
      if (mc_out.empty()) {
        std::cout << out.files["table.csv"];
      } else {
        out.files.erase("summary.json");
        emit(out, mc_out);
      }
    } else if (*bt) {
      if (!bt_config.empty()) {
        const auto rep = nlohmann::json::parse(read_file(bt_config));
        bopt = backtest_options_from_json(rep.at("config"));
        if (bt_input.empty()) bt_input = rep.at("input").value("path", std::string{});
      }
      if (bt_input.empty()) throw DomainError("backtest: input file required");
      const std::string bytes = read_file(bt_input);
      auto out = cmd_backtest(parse_returns_csv(bytes), fnv1a_hex(bytes), bopt);
      out.report["input"]["path"] = bt_input;
      emit(out, bt_out);
    } else if (*sim) {
      const std::string csv = format_returns_csv(cmd_simulate(sopt));
      if (sim_out.empty())
        std::cout << csv;
      else
        write_file(sim_out, csv);
    }
  } catch (const Error& e) {
    std::cerr << "tailport: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "tailport: invalid report file: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "tailport: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
