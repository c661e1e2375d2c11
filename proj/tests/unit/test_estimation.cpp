#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "tailport/dgp.hpp"
#include "tailport/error.hpp"
#include "tailport/estimation.hpp"

using namespace tailport;
using Catch::Approx;

namespace {

// Plain loop over the APARCH recursion, written independently of the library.
std::vector<double> brute_aparch_sigma(const std::vector<double>& y, double w, double ap, double am, double b,
                                       double delta) {
  std::vector<double> sd(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double prev_y = t == 0 ? 0.0 : y[t - 1];
    const double prev_sd = t == 0 ? 0.0 : sd[t - 1];
    sd[t] = w + ap * std::pow(std::max(prev_y, 0.0), delta) + am * std::pow(std::max(-prev_y, 0.0), delta) +
            b * prev_sd;
  }
  for (auto& s : sd) s = delta == 1.0 ? s : std::pow(s, 1.0 / delta);
  return sd;
}

std::vector<double> garch_series(std::uint64_t seed, std::size_t n, double w = 0.05, double a = 0.10,
                                 double b = 0.85) {
  ArmaGarchParams p;
  p.omega = w;
  p.alpha = {a};
  p.beta = {b};
  Engine rng = make_stream(seed, 0);
  return simulate_garch(rng, p, n).returns;
}

}  // namespace

TEST_CASE("APARCH filter hand examples") {
  const std::vector<double> y{1.0, -2.0, 0.5};
  const auto f = aparch_filter(y, {0.1, 0.2, 0.2, 0.7}, 2.0);
  CHECK(f.sigma[0] * f.sigma[0] == Approx(0.1));
  CHECK(f.sigma[1] * f.sigma[1] == Approx(0.37));
  const auto g = aparch_filter(y, {0.3, 0.1, 0.2, 0.5}, 1.0);
  CHECK(g.sigma[0] == 0.3);  // zero initialization
  CHECK(g.residuals[0] == 1.0 / 0.3);
  CHECK_THROWS_AS(aparch_filter(y, {0.0, 0.1, 0.1, 0.5}, 1.0), DomainError);
}

TEST_CASE("APARCH filter matches a brute-force recursion") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<double> y(300);
  for (auto& v : y) v = z(rng);
  for (double delta : {1.0, 2.0, 1.5}) {
    const auto f = aparch_filter(y, {0.05, 0.03, 0.09, 0.84}, delta);
    const auto ref = brute_aparch_sigma(y, 0.05, 0.03, 0.09, 0.84, delta);
    for (std::size_t t = 0; t < y.size(); ++t) {
      if (delta == 1.0)
        CHECK(f.sigma[t] == ref[t]);
      else
        CHECK(f.sigma[t] == Approx(ref[t]).epsilon(1e-15));
      CHECK(f.residuals[t] == y[t] / f.sigma[t]);
    }
    for (double s : f.sigma) CHECK(std::pow(s, delta) >= 0.05 * (1.0 - 1e-12));
  }
}

TEST_CASE("APARCH with delta 2 and symmetric loadings nests GARCH") {
  const auto y = garch_series(2, 500);
  const auto a = aparch_filter(y, {0.05, 0.1, 0.1, 0.85}, 2.0);
  const auto g = garch_filter(y, {0.05, 0.1, 0.85});
  CHECK(a.sigma == g.sigma);
  CHECK(a.residuals == g.residuals);
}

TEST_CASE("ARMA-GARCH residual recursion hand examples") {
  ArmaGarchParams ar;
  ar.phi = {0.5};
  const auto f = arma_garch_filter(std::vector<double>{2.0, 3.0}, ar);
  CHECK(f.residuals[0] * f.sigma[0] == Approx(2.0));
  CHECK(f.residuals[1] * f.sigma[1] == Approx(2.0));
  CHECK(f.mu[1] == Approx(1.0));
  ArmaGarchParams ma;
  ma.theta_ma = {0.5};
  const auto m = arma_garch_filter(std::vector<double>{1.0, 0.0, 0.0}, ma);
  CHECK(m.residuals[0] * m.sigma[0] == Approx(1.0));
  CHECK(m.residuals[1] * m.sigma[1] == Approx(0.5));
  CHECK(m.residuals[2] * m.sigma[2] == Approx(0.25));
  // sigma_1^2 = omega
  CHECK(m.sigma[0] * m.sigma[0] == Approx(ma.omega));
}

TEST_CASE("ARMA-GARCH filter with zero ARMA part equals GARCH filter") {
  const auto y = garch_series(3, 300);
  ArmaGarchParams p;
  p.phi = {0.0};
  p.theta_ma = {0.0};
  p.omega = 0.05;
  p.alpha = {0.1};
  p.beta = {0.85};
  const auto a = arma_garch_filter(y, p);
  const auto g = garch_filter(y, {0.05, 0.1, 0.85});
  CHECK(a.sigma == g.sigma);
  CHECK(a.residuals == g.residuals);
}

TEST_CASE("model specification") {
  CHECK(ModelSpec::aparch11().parameter_count() == 4);
  CHECK(ModelSpec::garch11().parameter_count() == 3);
  CHECK(ModelSpec::arma_garch({1, 1, 1, 1}).parameter_count() == 5);
  CHECK(ModelSpec::arma_garch({2, 0, 1, 1}).parameter_names() ==
        std::vector<std::string>{"phi1", "phi2", "omega", "alpha1", "beta1"});
  CHECK(parse_model_kind("arma-garch") == ModelKind::arma_garch);
  CHECK_THROWS_AS(parse_model_kind("egarch"), DomainError);
  const std::vector<double> y(100, 0.1);
  CHECK_THROWS_AS(run_filter(y, ModelSpec::garch11(), std::vector<double>{0.1, 0.1}), DomainError);
}

TEST_CASE("search transforms stay feasible and invert") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 5.0);
  for (const auto& model :
       {ModelSpec::aparch11(), ModelSpec::garch11(), ModelSpec::arma_garch({1, 1, 2, 1})}) {
    for (int i = 0; i < 200; ++i) {
      std::vector<double> u(model.parameter_count());
      for (auto& v : u) v = z(rng);
      const auto p = to_natural(model, u);
      if (model.kind == ModelKind::aparch11) {
        CHECK(p[0] > 0.0);
        CHECK(p[3] <= 0.9999);
        for (double v : p) CHECK(v >= 0.0);
      } else {
        const std::size_t first = model.kind == ModelKind::garch11 ? 0 : 2;
        CHECK(p[first] > 0.0);
        double total = 0.0;
        for (std::size_t j = first + 1; j < p.size(); ++j) {
          CHECK(p[j] >= 0.0);
          total += p[j];
        }
        CHECK(total <= 0.9999);
      }
      const auto back = to_natural(model, to_search(model, p));
      for (std::size_t j = 0; j < p.size(); ++j) CHECK(back[j] == Approx(p[j]).epsilon(1e-6).margin(1e-9));
    }
  }
}

TEST_CASE("GARCH QML recovers the parameters") {
  const auto y = garch_series(10, 5000);
  const std::vector<double> truth{0.05, 0.10, 0.85};
  FitOptions opts;
  opts.record_trace = true;
  const auto fit = qml_fit(y, ModelSpec::garch11(), opts);
  REQUIRE(fit.converged);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(fit.params[i] - truth[i]) < 0.05);
  CHECK(fit.objective <= qml_objective(y, ModelSpec::garch11(), truth));
  for (double g : fit.gradient) CHECK(std::abs(g) < 1e-4);
  // the optimizer trace only records improvements
  for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] <= fit.trace[i - 1]);
  CHECK(fit.residuals().size() == 5000 - 10);
  CHECK(fit.residuals_after_burnin.size() == 5000 - 10);
  CHECK(fit.loglik == Approx(-0.5 * 4990 * (std::log(2 * M_PI) + fit.objective)));
  const auto res = fit.residuals();
  double var = 0.0;
  for (double e : res) var += e * e;
  CHECK(var / res.size() == Approx(1.0).margin(0.05));
  CHECK(standardized_residuals(fit).size() == 4990);
}

TEST_CASE("APARCH QML on the size design") {
  Engine rng = make_stream(11, 0);
  const auto path = simulate_aparch_x(rng, AparchXParams::size_design(), 3000, 10);
  const auto fit = qml_fit(path.returns, ModelSpec::aparch11(1.0));
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.params[0] - 0.046) < 0.05);
  CHECK(std::abs(fit.params[3] - 0.843) < 0.1);
  for (double g : fit.gradient) CHECK(std::abs(g) < 1e-4);
  CHECK(fit.objective <= qml_objective(path.returns, ModelSpec::aparch11(1.0),
                                       std::vector<double>{0.046, 0.027, 0.092, 0.843}));
}

TEST_CASE("ARMA-GARCH QML") {
  ArmaGarchParams p;
  p.phi = {0.4};
  p.omega = 0.05;
  p.alpha = {0.1};
  p.beta = {0.85};
  Engine rng = make_stream(12, 0);
  const auto path = simulate_arma_garch(rng, p, 4000);
  const auto fit = qml_fit(path.returns, ModelSpec::arma_garch({1, 0, 1, 1}));
  REQUIRE(fit.converged);
  CHECK(fit.params[0] == Approx(0.4).margin(0.05));
  CHECK(fit.params[2] == Approx(0.1).margin(0.05));
  CHECK(fit.params[3] == Approx(0.85).margin(0.07));
}

TEST_CASE("QML input guards") {
  std::vector<double> shortseries(40, 0.1);
  CHECK_THROWS_AS(qml_fit(shortseries, ModelSpec::garch11()), DataError);
  auto y = garch_series(13, 200);
  y[50] = NAN;
  CHECK_THROWS_AS(qml_fit(y, ModelSpec::garch11()), DataError);
}

TEST_CASE("non-convergence is reported with the best iterate") {
  const auto y = garch_series(14, 400);
  FitOptions opts;
  opts.max_iterations = 3;
  opts.restarts = 1;
  try {
    (void)qml_fit(y, ModelSpec::garch11(), opts);
    FAIL("expected FitFailed");
  } catch (const FitFailed& e) {
    CHECK(e.best_params().size() == 3);
    CHECK(std::isfinite(e.best_objective()));
  }
  opts.throw_on_failure = false;
  const auto fit = qml_fit(y, ModelSpec::garch11(), opts);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("fitting is deterministic") {
  const auto y = garch_series(15, 1000);
  const auto a = qml_fit(y, ModelSpec::garch11());
  const auto b = qml_fit(y, ModelSpec::garch11());
  CHECK(a.params == b.params);
  CHECK(a.residuals() == b.residuals());
}
