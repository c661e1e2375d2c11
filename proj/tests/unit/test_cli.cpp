#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <catch_amalgamated.hpp>

#include "tailport/cli_commands.hpp"
#include "tailport/error.hpp"
#include "tailport/returns_io.hpp"

using namespace tailport;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

ReturnsSeries garch_input(std::uint64_t seed, std::size_t n) {
  SimulateOptions s;
  s.n = n;
  s.seed = seed;
  return cmd_simulate(s);
}

std::size_t line_of(const std::string& text) {
  try {
    (void)parse_returns_csv(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "tailport_cli_test";
  fs::create_directories(dir);
  return dir;
}

// Runs the built tool through the shell; returns its exit status.
int run_tool(const std::string& args) {
  const char* exe = std::getenv("TAILPORT_CLI");
  const std::string cmd = std::string("\"") + exe + "\" " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("returns CSV parsing") {
  const auto s = parse_returns_csv("date,value\n2020-01-02,0.5\n2020-01-03,-1.25\n2020-01-06T00:00:00,2\n");
  CHECK(s.size() == 3);
  CHECK(s.dates[1] == "2020-01-03");
  CHECK(s.values[1] == -1.25);
  CHECK(parse_returns_csv("date,value\r\n2020-01-02,1\r\n").size() == 1);

  CHECK(line_of("") == 1);
  CHECK(line_of("date,value\n2020-01-02,1\n2020-01-03,\n") == 3);
  CHECK(line_of("date,value\n2020-01-02,abc\n") == 2);
  CHECK(line_of("date,value\n2020-02-30,1\n") == 2);
  CHECK(line_of("date,value\n2020-01-03,1\n2020-01-02,1\n") == 3);
  CHECK(line_of("date,value\n2020-01-03,1\n2020-01-03,1\n") == 3);
  CHECK(line_of("date,value\n2020-01-03,1,2\n") == 2);
  CHECK(line_of("date,value\n2020-01-03,nan\n") == 2);
}

TEST_CASE("returns CSV round-trips losslessly") {
  const auto s = garch_input(3, 300);
  const auto back = parse_returns_csv(format_returns_csv(s));
  CHECK(back.dates == s.dates);
  CHECK(back.values == s.values);
  CHECK(synthetic_dates(3, "2020-02-28") == std::vector<std::string>{"2020-02-28", "2020-02-29", "2020-03-01"});
}

TEST_CASE("log returns") {
  ReturnsSeries p{{"2020-01-01", "2020-01-02", "2020-01-03"}, {100.0, 110.0, 99.0}};
  const auto r = log_returns(p);
  REQUIRE(r.size() == 2);
  CHECK(r.dates[0] == "2020-01-02");
  CHECK(r.values[0] == Approx(std::log(1.1)));
  CHECK(r.values[1] == Approx(std::log(0.9)));
  p.values[1] = 0.0;
  CHECK_THROWS_AS(log_returns(p), DataError);
}

TEST_CASE("digest") {
  const std::string a = "abc";
  CHECK(fnv1a_hex(a) == "e71fa2190541574b");
  CHECK(fnv1a_hex(std::string{}) == "cbf29ce484222325");
}

TEST_CASE("test command report") {
  const auto s = garch_input(5, 1500);
  TestOptions o;
  o.model.model = "garch11";
  o.k_sweep = true;
  o.lag_plot = true;
  const auto a = cmd_test(s, "d", o);
  const auto b = cmd_test(s, "d", o);
  CHECK(a.report == b.report);
  CHECK(a.files == b.files);
  const auto& rep = a.report;
  CHECK(rep["command"] == "test");
  CHECK(rep["residuals"]["count"] == 1490);
  CHECK(rep["bandwidth"]["k"] == default_k(1490).k);
  CHECK(rep["tests"]["P"]["D"] == 5);
  CHECK(rep["tests"]["F"]["statistic"].get<double>() >= 0.0);
  CHECK(rep["model"]["params"].size() == 3);
  CHECK(a.files.at("k_sweep.csv").rfind("#meta,default_k,", 0) == 0);
  CHECK(a.files.at("lags.csv").rfind("lag,lambda_hat", 0) == 0);

  // replaying the recorded configuration reproduces the run
  const auto replay = cmd_test(s, "d", test_options_from_json(rep["config"]));
  CHECK(replay.report == rep);
}

TEST_CASE("test command guards and residual mode") {
  TestOptions o;
  CHECK_THROWS_AS(cmd_test(garch_input(6, 199), "d", o), DataError);
  o.D = 0;
  CHECK_THROWS_AS(cmd_test(garch_input(6, 400), "d", o), InvalidLag);
  o.D = 5;
  o.residuals_only = true;
  const auto s = garch_input(6, 400);
  const auto r = cmd_test(s, "d", o);
  CHECK(r.report["model"].is_null());
  CHECK(r.report["residuals"]["count"] == 400);
  CHECK(r.report["tests"]["LB"]["estimation_effect_ignored"] == false);
  o.k = 0;
  CHECK_THROWS_AS(cmd_test(s, "d", o), InvalidBandwidth);
}

TEST_CASE("cv command") {
  CvOptions o;
  o.D_max = 2;
  o.sim.reps = 999;
  CHECK_THROWS_AS(cmd_cv(o), DomainError);
  o.sim.reps = 2000;
  o.sim.grid_points = 1000;
  o.sim.seed = 4;
  o.sim.jobs = 1;
  const auto a = cmd_cv(o);
  const auto b = cmd_cv(o);
  CHECK(a.files.at("cv.csv") == b.files.at("cv.csv"));
  CHECK(a.files.at("cv.csv").rfind("alpha,D1,D2\n", 0) == 0);
}

TEST_CASE("backtest command") {
  const auto s = garch_input(8, 1200);
  BacktestOptions o;
  o.model.model = "garch11";
  o.theta = 0.05;
  const auto r = cmd_backtest(s, "d", o);
  CHECK(r.report["var"]["in_sample"] == 960);
  CHECK(r.report["var"]["out_of_sample"] == 240);
  CHECK(r.report["dq"]["df"] == 6);
  CHECK(r.files.at("forecasts.csv").rfind("date,return,var,hit\n", 0) == 0);
  CHECK(cmd_backtest(s, "d", backtest_options_from_json(r.report["config"])).report == r.report);
  o.split = 0.97;
  CHECK_THROWS_AS(cmd_backtest(s, "d", o), DomainError);
  o.split = 0.8;
  CHECK_THROWS_AS(cmd_backtest(garch_input(8, 240), "d", o), DataError);
}

TEST_CASE("mc dry run") {
  McOptions o;
  o.config.reps = 10;
  o.dry_run = true;
  const auto r = cmd_mc(o);
  CHECK(r.report["dry_run"] == true);
  CHECK(r.files.empty());
}

TEST_CASE("tool exit codes") {
  if (!std::getenv("TAILPORT_CLI")) SKIP("tool path not provided");
  const auto dir = scratch();
  const auto good = (dir / "good.csv").string();
  write_file(good, format_returns_csv(garch_input(9, 600)));
  const auto bad = (dir / "bad.csv").string();
  write_file(bad, "date,value\n2020-01-02,x\n");
  const auto prefix = (dir / "run").string();

  CHECK(run_tool("--version") == 0);
  CHECK(run_tool("test " + good + " --model garch11 --out " + prefix) == 0);
  CHECK(fs::exists(prefix + ".json"));
  CHECK(run_tool("test --config " + prefix + ".json --out " + (dir / "replay").string()) == 0);
  CHECK(read_file(prefix + ".json") == read_file((dir / "replay.json").string()));
  CHECK(run_tool("test " + bad) == 2);
  CHECK(run_tool("test " + (dir / "missing.csv").string()) == 2);
  CHECK(run_tool("test " + good + " --lags 0") == 1);
  CHECK(run_tool("test " + good + " --model egarch") == 1);
  CHECK(run_tool("cv --reps 10") == 1);
  CHECK(run_tool("backtest " + good + " --split 0.99") == 1);
  CHECK(run_tool("simulate -n 50 --out " + (dir / "sim.csv").string()) == 0);
  fs::remove_all(dir);
}
