#include "tailport/cli_commands.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tailport/baseline_diagnostics.hpp"
#include "tailport/dgp.hpp"
#include "tailport/error.hpp"
#include "tailport/limit_distributions.hpp"
#include "tailport/risk_backtesting.hpp"
#include "tailport/rng.hpp"

#ifndef TAILPORT_VERSION
#define TAILPORT_VERSION "0.0.0"
#endif

namespace tailport {

const char* const kVersion = TAILPORT_VERSION;

using nlohmann::json;

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string alpha_key(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

json model_options_json(const ModelOptions& m) {
  return {{"model", m.model}, {"delta", m.delta}, {"ar", m.ar},
          {"ma", m.ma},       {"burn_in", m.burn_in}, {"seed", m.seed}};
}

ModelOptions model_options_from_json(const json& j) {
  ModelOptions m;
  m.model = j.value("model", m.model);
  m.delta = j.value("delta", m.delta);
  m.ar = j.value("ar", m.ar);
  m.ma = j.value("ma", m.ma);
  m.burn_in = j.value("burn_in", m.burn_in);
  m.seed = j.value("seed", m.seed);
  return m;
}

json fit_json(const FitResult& fit) {
  json params = json::object();
  const auto names = fit.model.parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = fit.params[i];
  return {{"name", to_string(fit.model.kind)},
          {"delta", fit.model.delta},
          {"params", params},
          {"objective", fit.objective},
          {"loglik", fit.loglik},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"observations", fit.observations.size()},
          {"burn_in", fit.burn_in}};
}

FitResult fit_model(std::span<const double> y, const ModelOptions& m) {
  FitOptions opts;
  opts.burn_in = m.burn_in;
  opts.seed = m.seed;
  return qml_fit(y, m.spec(), opts);
}

}  // namespace

ModelSpec ModelOptions::spec() const {
  const ModelKind kind = parse_model_kind(model);
  switch (kind) {
    case ModelKind::aparch11: return ModelSpec::aparch11(delta);
    case ModelKind::garch11: return ModelSpec::garch11();
    case ModelKind::arma_garch: return ModelSpec::arma_garch({ar, ma, 1, 1});
  }
  throw InternalError("unreachable model kind");
}

json to_json(const TailTestReport& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["statistic"] = r.statistic;
  j["n"] = r.n;
  j["D"] = r.D;
  j["k"] = r.k;
  if (r.iota) j["iota"] = *r.iota;
  if (r.x) j["x"] = *r.x;
  if (r.y) j["y"] = *r.y;
  j["per_lag"] = r.per_lag;
  j["per_lag_contribution"] = r.per_lag_contribution;
  json cv = json::object();
  json rej = json::object();
  for (const auto& [a, c] : r.critical_values) {
    cv[alpha_key(a)] = c;
    rej[alpha_key(a)] = r.rejects(a);
  }
  j["critical_values"] = cv;
  j["rejects"] = rej;
  j["p_value"] = r.p_value;
  j["reference"] = r.reference;
  j["degenerate_input"] = r.degenerate_input;
  return j;
}

json to_json(const RejectionTable& t) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    json cell{{"test", to_string(c.test)}, {"n", c.n},         {"D", c.D},
              {"k", c.k},                  {"alpha", c.alpha}, {"rejections", c.rejections},
              {"valid", c.valid}};
    if (c.valid > 0) {
      cell["frequency"] = c.frequency();
      cell["se"] = c.se();
    } else {
      cell["frequency"] = nullptr;
      cell["se"] = nullptr;
    }
    cells.push_back(cell);
  }
  return {{"design", to_string(t.design)}, {"reps", t.reps}, {"failed", t.failed}, {"cells", cells}};
}

// ---------------------------------------------------------------------------
// test

namespace {

json test_options_json(const TestOptions& o) {
  json j{{"model", model_options_json(o.model)},
         {"D", o.D},
         {"rho", o.rho},
         {"iota", o.iota},
         {"alphas", o.alphas},
         {"residuals_only", o.residuals_only},
         {"log_returns", o.log_returns},
         {"k_sweep", o.k_sweep},
         {"sweep_rho_min", o.sweep_rho_min},
         {"sweep_rho_max", o.sweep_rho_max},
         {"lag_plot", o.lag_plot},
         {"lag_plot_max", o.lag_plot_max}};
  j["k"] = o.k ? json(*o.k) : json(nullptr);
  return j;
}

}  // namespace

TestOptions test_options_from_json(const json& j) {
  TestOptions o;
  if (j.contains("model")) o.model = model_options_from_json(j["model"]);
  o.D = j.value("D", o.D);
  if (j.contains("k") && !j["k"].is_null()) o.k = j["k"].get<std::size_t>();
  o.rho = j.value("rho", o.rho);
  o.iota = j.value("iota", o.iota);
  o.alphas = j.value("alphas", o.alphas);
  o.residuals_only = j.value("residuals_only", o.residuals_only);
  o.log_returns = j.value("log_returns", o.log_returns);
  o.k_sweep = j.value("k_sweep", o.k_sweep);
  o.sweep_rho_min = j.value("sweep_rho_min", o.sweep_rho_min);
  o.sweep_rho_max = j.value("sweep_rho_max", o.sweep_rho_max);
  o.lag_plot = j.value("lag_plot", o.lag_plot);
  o.lag_plot_max = j.value("lag_plot_max", o.lag_plot_max);
  return o;
}

CommandOutput cmd_test(const ReturnsSeries& input, const std::string& input_digest, const TestOptions& o) {
  if (o.D == 0) throw InvalidLag("D must be >= 1");
  if (!(o.iota > 0.0 && o.iota < 0.5)) throw DomainError("iota must lie in (0, 0.5)");
  for (double a : o.alphas)
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const ReturnsSeries series = o.log_returns ? log_returns(input) : input;
  if (series.size() < kMinTestObservations)
    throw DataError("series has " + std::to_string(series.size()) + " observations; at least " +
                    std::to_string(kMinTestObservations) + " are required");

  CommandOutput out;
  json& rep = out.report;
  rep["tool"] = "tailport";
  rep["version"] = kVersion;
  rep["command"] = "test";
  rep["input"] = {{"digest", input_digest}, {"observations", series.size()}};
  rep["config"] = test_options_json(o);

  std::vector<double> residuals;
  std::size_t offset = 0;  // index of the first residual in the series
  if (o.residuals_only) {
    residuals = series.values;
    rep["model"] = nullptr;
  } else {
    const FitResult fit = fit_model(series.values, o.model);
    residuals = fit.residuals();
    offset = fit.burn_in;
    rep["model"] = fit_json(fit);
  }

  const auto sample = ResidualSample::from_residuals(residuals);
  const std::size_t n = sample.size();
  const Bandwidth k = o.k ? Bandwidth::fixed(*o.k) : default_k(n, o.rho);
  if (o.D >= n) throw InvalidLag("D must be smaller than the number of residuals");

  FunctionalOptions fo;
  fo.alphas = o.alphas;
  const auto F = functional_F(sample, k, o.D, o.iota, fo);
  const auto P = portmanteau_P(sample, k, o.D, 1.0, 1.0, o.alphas);
  const auto lb = ljung_box(residuals, o.D, !o.residuals_only);
  json lbj{{"statistic", lb.statistic},
           {"p_value", lb.p_value},
           {"D", lb.D},
           {"estimation_effect_ignored", lb.estimation_effect_ignored}};
  json lbcv = json::object(), lbrej = json::object();
  for (double a : o.alphas) {
    const double c = chi2_quantile(1.0 - a, o.D);
    lbcv[alpha_key(a)] = c;
    lbrej[alpha_key(a)] = lb.statistic > c;
  }
  lbj["critical_values"] = lbcv;
  lbj["rejects"] = lbrej;
  rep["bandwidth"] = {{"k", k.k}, {"rule", o.k ? "explicit" : "power_law"}, {"rho", o.k ? 0.0 : o.rho}};
  rep["tests"] = {{"F", to_json(F)}, {"P", to_json(P)}, {"LB", lbj}};
  rep["residuals"] = {{"count", n}, {"first_index", offset}};

  if (o.k_sweep) {
    if (!(o.sweep_rho_min > 0.0 && o.sweep_rho_min <= o.sweep_rho_max))
      throw DomainError("k sweep: need 0 < rho_min <= rho_max");
    const std::size_t k_lo = std::max<std::size_t>(1, default_k(n, o.sweep_rho_min).k);
    const std::size_t k_hi = default_k(n, o.sweep_rho_max).k;
    const double p_crit = chi2_quantile(0.95, o.D);
    const double f_crit = decision_critical_value(TestName::F, o.D, 0.05, o.iota);
    std::ostringstream csv;
    csv << "#meta,default_k," << default_k(n).k << "\n";
    csv << "k,F,P,F_crit_5,P_crit_5\n";
    for (std::size_t kk = k_lo; kk <= k_hi; ++kk) {
      double f = 0.0, p = 0.0;
      for (double v : functional_terms(sample, Bandwidth::fixed(kk), o.D, o.iota)) f += v;
      for (double v : pointwise_terms(sample, Bandwidth::fixed(kk), o.D, 1.0, 1.0)) p += v;
      csv << kk << "," << g6(f) << "," << g6(p) << "," << g6(f_crit) << "," << g6(p_crit) << "\n";
    }
    out.files["k_sweep.csv"] = csv.str();
  }

  if (o.lag_plot) {
    const std::size_t max_lag = std::min(std::max(o.lag_plot_max, o.D), n - 1);
    const auto lam = tail_copula_lags(sample, k, max_lag, 1.0, 1.0);
    const auto band = null_band(n, k.k, 0.05);
    std::ostringstream csv;
    csv << "lag,lambda_hat,lambda_band_lo,lambda_band_hi,acf_sq,acf_band_lo,acf_band_hi\n";
    std::vector<double> acf;
    try {
      acf = acf_squared(residuals, max_lag).rho_hat;
    } catch (const DegenerateData&) {
      acf.clear();
    }
    const double acf_half = normal_quantile(0.975) / std::sqrt(static_cast<double>(n));
    for (std::size_t d = 1; d <= max_lag; ++d) {
      csv << d << "," << g6(lam[d - 1]) << "," << g6(band.lo) << "," << g6(band.hi) << ","
          << (acf.empty() ? std::string("NA") : g6(acf[d - 1])) << "," << g6(-acf_half) << "," << g6(acf_half)
          << "\n";
    }
    out.files["lags.csv"] = csv.str();
  }
  return out;
}

// ---------------------------------------------------------------------------
// cv

CommandOutput cmd_cv(const CvOptions& o) {
  o.sim.validate();
  if (o.D_max == 0) throw InvalidLag("D_max must be >= 1");
  const auto table = simulate_critical_values(o.sim, o.D_max, o.alphas);
  std::ostringstream csv;
  csv << "alpha";
  for (std::size_t D = 1; D <= o.D_max; ++D) csv << ",D" << D;
  csv << "\n";
  json entries = json::array();
  for (double a : o.alphas) {
    csv << g6(a);
    for (std::size_t D = 1; D <= o.D_max; ++D) {
      const double c = table.at(D, a);
      csv << "," << g6(c);
      entries.push_back({{"D", D}, {"alpha", a}, {"value", c}});
    }
    csv << "\n";
  }
  CommandOutput out;
  out.report = {{"tool", "tailport"},
                {"version", kVersion},
                {"command", "cv"},
                {"config",
                 {{"D_max", o.D_max},
                  {"alphas", o.alphas},
                  {"iota", o.sim.iota},
                  {"reps", o.sim.reps},
                  {"grid_points", o.sim.grid_points},
                  {"seed", o.sim.seed}}},
                {"critical_values", entries}};
  out.files["cv.csv"] = csv.str();
  return out;
}

// ---------------------------------------------------------------------------
// mc

CommandOutput cmd_mc(const McOptions& o) {
  CommandOutput out;
  const std::string plan = describe_plan(o.config);
  out.report = {{"tool", "tailport"},
                {"version", kVersion},
                {"command", "mc"},
                {"config_text", to_config_text(o.config)},
                {"plan", plan}};
  if (o.dry_run) {
    out.report["dry_run"] = true;
    return out;
  }
  const auto result = run_experiment(o.config);
  const auto& t = result.table;
  std::ostringstream csv;
  csv << "test,n,D,k,alpha,rejections,valid,frequency,se\n";
  for (const auto& c : t.cells) {
    csv << to_string(c.test) << "," << c.n << "," << c.D << "," << c.k << "," << g6(c.alpha) << ","
        << c.rejections << "," << c.valid << ",";
    if (c.valid > 0)
      csv << g6(c.frequency()) << "," << g6(c.se()) << "\n";
    else
      csv << "NA,NA\n";
  }
  out.files["table.csv"] = csv.str();
  out.files["vs_k.csv"] = emit_figure_data(t, o.config, FigureKind::rejection_vs_k);
  out.files["vs_D.csv"] = emit_figure_data(t, o.config, FigureKind::rejection_vs_D);
  out.report["table"] = to_json(t);
  out.files["summary.json"] = out.report.dump(2) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// backtest

namespace {

json backtest_options_json(const BacktestOptions& o) {
  return {{"model", model_options_json(o.model)},
          {"split", o.split},
          {"theta", o.theta},
          {"dq_lags", o.dq_lags},
          {"log_returns", o.log_returns}};
}

}  // namespace

BacktestOptions backtest_options_from_json(const json& j) {
  BacktestOptions o;
  if (j.contains("model")) o.model = model_options_from_json(j["model"]);
  o.split = j.value("split", o.split);
  o.theta = j.value("theta", o.theta);
  o.dq_lags = j.value("dq_lags", o.dq_lags);
  o.log_returns = j.value("log_returns", o.log_returns);
  return o;
}

CommandOutput cmd_backtest(const ReturnsSeries& input, const std::string& input_digest, const BacktestOptions& o) {
  if (!(o.split > 0.5 && o.split < 0.95)) throw DomainError("split must lie in (0.5, 0.95)");
  if (!(o.theta > 0.0 && o.theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  const ReturnsSeries series = o.log_returns ? log_returns(input) : input;
  const std::size_t n = series.size();
  const auto n_in = static_cast<std::size_t>(std::floor(o.split * static_cast<double>(n)));
  if (n_in < kMinTestObservations)
    throw DataError("in-sample window has " + std::to_string(n_in) + " observations; at least " +
                    std::to_string(kMinTestObservations) + " are required");
  const std::span<const double> all(series.values);
  const FitResult fit = fit_model(all.first(n_in), o.model);
  const auto v = forecast_var(fit, all.subspan(n_in), o.theta);
  const auto dq = dq_test(v, o.dq_lags);

  CommandOutput out;
  out.report = {{"tool", "tailport"},
                {"version", kVersion},
                {"command", "backtest"},
                {"input", {{"digest", input_digest}, {"observations", n}}},
                {"config", backtest_options_json(o)},
                {"model", fit_json(fit)},
                {"var",
                 {{"theta", o.theta},
                  {"var_eps", v.var_eps},
                  {"in_sample", n_in},
                  {"out_of_sample", v.hits.size()},
                  {"hit_count", v.hit_count()},
                  {"hit_frequency", v.hit_frequency()}}},
                {"dq",
                 {{"statistic", dq.statistic},
                  {"p_value", dq.p_value},
                  {"df", dq.df},
                  {"lags", o.dq_lags},
                  {"observations", dq.observations},
                  {"degenerate", dq.degenerate},
                  {"rejects_5pct", dq.p_value < 0.05}}}};
  std::ostringstream csv;
  csv << "date,return,var,hit\n";
  char buf[40];
  for (std::size_t i = 0; i < v.hits.size(); ++i) {
    csv << series.dates[n_in + i] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", v.realized[i]);
    csv << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", v.forecasts[i]);
    csv << buf << "," << v.hits[i] << "\n";
  }
  out.files["forecasts.csv"] = csv.str();
  return out;
}

// ---------------------------------------------------------------------------
// simulate

ReturnsSeries cmd_simulate(const SimulateOptions& o) {
  if (o.n == 0) throw DomainError("n must be >= 1");
  Engine rng = make_stream(o.seed, 0);
  ReturnsSeries s;
  if (o.process == "garch") {
    ArmaGarchParams p;
    p.omega = o.omega;
    p.alpha = {o.alpha};
    p.beta = {o.beta};
    Innovation innov = NormalInnovation{};
    if (o.innovation == "t")
      innov = StudentTInnovation{o.nu};
    else if (o.innovation != "normal")
      throw DomainError("innovation must be normal or t");
    s.values = simulate_garch(rng, p, o.n, innov).returns;
  } else if (o.process == "aparch_x_size" || o.process == "aparch_x_power") {
    const auto p = o.process == "aparch_x_size" ? AparchXParams::size_design() : AparchXParams::power_design();
    s.values = simulate_aparch_x(rng, p, o.n, 0).returns;
  } else if (o.process == "garch_skewt_size" || o.process == "garch_skewt_power") {
    const auto tv =
        o.process == "garch_skewt_size" ? TvSkewTParams::null_design() : TvSkewTParams::alternative_design();
    s.values = simulate_garch_tvskewt(rng, GarchParams{}, tv, o.n).returns;
  } else {
    throw DomainError("unknown process '" + o.process + "'");
  }
  s.dates = synthetic_dates(o.n);
  return s;
}

}  // namespace tailport
