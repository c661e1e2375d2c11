#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tailport/baseline_diagnostics.hpp"
#include "tailport/cli_commands.hpp"
#include "tailport/dgp.hpp"
#include "tailport/error.hpp"
#include "tailport/estimation.hpp"
#include "tailport/experiments.hpp"
#include "tailport/limit_distributions.hpp"
#include "tailport/risk_backtesting.hpp"
#include "tailport/tail_dependence.hpp"

namespace py = pybind11;
using namespace tailport;

namespace {

// Reports cross the boundary as JSON text; the Python side decodes them.
std::string report_json(const TailTestReport& r) { return to_json(r).dump(); }

Bandwidth bandwidth_for(std::size_t n, std::optional<std::size_t> k, double rho) {
  return k ? Bandwidth::fixed(*k) : default_k(n, rho);
}

ModelSpec model_spec(const std::string& model, double delta, std::size_t ar, std::size_t ma) {
  ModelOptions m;
  m.model = model;
  m.delta = delta;
  m.ar = ar;
  m.ma = ma;
  return m.spec();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "tail-copula portmanteau tests (native core)";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "TailportError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<InvalidBandwidth>(m, "InvalidBandwidth", base);
  py::register_exception<InvalidLag>(m, "InvalidLag", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<DegenerateData>(m, "DegenerateData", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<CapacityError>(m, "CapacityError", base);
  py::register_exception<FitFailed>(m, "FitFailed", base);

  m.def("default_k", [](std::size_t n, double rho) { return default_k(n, rho).k; }, py::arg("n"),
        py::arg("rho") = kDefaultRho);

  m.def(
      "tail_copula_lags",
      [](const std::vector<double>& residuals, std::size_t D, std::optional<std::size_t> k, double x, double y) {
        const auto s = ResidualSample::from_residuals(residuals);
        return tail_copula_lags(s, bandwidth_for(s.size(), k, kDefaultRho), D, x, y);
      },
      py::arg("residuals"), py::arg("D") = kDefaultLags, py::arg("k") = py::none(), py::arg("x") = 1.0,
      py::arg("y") = 1.0);

  m.def(
      "portmanteau_p",
      [](const std::vector<double>& residuals, std::size_t D, std::optional<std::size_t> k, double rho, double x,
         double y) {
        const auto s = ResidualSample::from_residuals(residuals);
        return report_json(portmanteau_P(s, bandwidth_for(s.size(), k, rho), D, x, y));
      },
      py::arg("residuals"), py::arg("D") = kDefaultLags, py::arg("k") = py::none(), py::arg("rho") = kDefaultRho,
      py::arg("x") = 1.0, py::arg("y") = 1.0);

  m.def(
      "functional_f",
      [](const std::vector<double>& residuals, std::size_t D, std::optional<std::size_t> k, double rho,
         double iota) {
        const auto s = ResidualSample::from_residuals(residuals);
        return report_json(functional_F(s, bandwidth_for(s.size(), k, rho), D, iota));
      },
      py::arg("residuals"), py::arg("D") = kDefaultLags, py::arg("k") = py::none(), py::arg("rho") = kDefaultRho,
      py::arg("iota") = kDefaultIota);

  m.def("chi2_cdf", &chi2_cdf, py::arg("x"), py::arg("df"));
  m.def("chi2_quantile", &chi2_quantile, py::arg("p"), py::arg("df"));
  m.def(
      "critical_value", [](std::size_t D, double alpha, double iota) { return critical_value(D, alpha, iota); },
      py::arg("D"), py::arg("alpha"), py::arg("iota") = kDefaultIota);

  m.def(
      "simulate_limit",
      [](std::size_t D, std::size_t reps, std::size_t grid_points, std::uint64_t seed, double iota, unsigned jobs) {
        BridgeSimConfig c;
        c.reps = reps;
        c.grid_points = grid_points;
        c.seed = seed;
        c.iota = iota;
        c.jobs = jobs;
        py::gil_scoped_release release;
        const auto s = simulate_limit(c, D);
        return std::vector<double>(s.draws().begin(), s.draws().end());
      },
      py::arg("D"), py::arg("reps") = 10000, py::arg("grid_points") = 1000, py::arg("seed") = 20211231,
      py::arg("iota") = kDefaultIota, py::arg("jobs") = 0);

  m.def(
      "simulate_garch",
      [](std::size_t n, std::uint64_t seed, double omega, double alpha, double beta) {
        ArmaGarchParams p;
        p.omega = omega;
        p.alpha = {alpha};
        p.beta = {beta};
        Engine rng = make_stream(seed, 0);
        return simulate_garch(rng, p, n).returns;
      },
      py::arg("n"), py::arg("seed") = 1, py::arg("omega") = 0.05, py::arg("alpha") = 0.10, py::arg("beta") = 0.85);

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("params", [](const FitResult& f) { return f.params; })
      .def_property_readonly("names", [](const FitResult& f) { return f.model.parameter_names(); })
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("gradient", &FitResult::gradient)
      .def_readonly("burn_in", &FitResult::burn_in)
      .def_property_readonly("sigma", [](const FitResult& f) { return f.filter.sigma; })
      .def("residuals", &FitResult::residuals);

  m.def(
      "qml_fit",
      [](const std::vector<double>& y, const std::string& model, double delta, std::size_t ar, std::size_t ma,
         std::size_t burn_in, std::uint64_t seed) {
        FitOptions o;
        o.burn_in = burn_in;
        o.seed = seed;
        const auto spec = model_spec(model, delta, ar, ma);
        py::gil_scoped_release release;
        return qml_fit(y, spec, o);
      },
      py::arg("y"), py::arg("model") = "garch11", py::arg("delta") = 1.0, py::arg("ar") = 0, py::arg("ma") = 0,
      py::arg("burn_in") = kDefaultBurnIn, py::arg("seed") = 7);

  m.def(
      "ljung_box",
      [](const std::vector<double>& residuals, std::size_t D) {
        const auto r = ljung_box(residuals, D);
        return py::dict(py::arg("statistic") = r.statistic, py::arg("p_value") = r.p_value, py::arg("D") = r.D);
      },
      py::arg("residuals"), py::arg("D") = kDefaultLags);

  m.def(
      "backtest",
      [](const std::vector<double>& y, const std::string& model, double delta, double split, double theta,
         std::size_t dq_lags) {
        BacktestOptions o;
        o.model.model = model;
        o.model.delta = delta;
        o.split = split;
        o.theta = theta;
        o.dq_lags = dq_lags;
        ReturnsSeries s{synthetic_dates(y.size()), y};
        py::gil_scoped_release release;
        return cmd_backtest(s, fnv1a_hex(std::string_view(reinterpret_cast<const char*>(y.data()),
                                                          y.size() * sizeof(double))),
                            o)
            .report.dump();
      },
      py::arg("y"), py::arg("model") = "garch11", py::arg("delta") = 1.0, py::arg("split") = 0.8,
      py::arg("theta") = 0.01, py::arg("dq_lags") = kDefaultDqLags);

  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        const auto config = parse_experiment_config(config_text);
        py::gil_scoped_release release;
        return to_json(run_experiment(config).table).dump();
      },
      py::arg("config_text"));
}
