#include "tailport/risk_backtesting.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tailport/error.hpp"
#include "tailport/limit_distributions.hpp"

namespace tailport {

double residual_var_quantile(std::span<const double> residuals, double theta) {
  if (residuals.empty()) throw DataError("VaR quantile: no residuals");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("VaR quantile: theta must lie in (0, 1)");
  std::vector<double> sorted(residuals.begin(), residuals.end());
  const double m = static_cast<double>(sorted.size());
  // Guard the product against rounding just above an integer.
  auto rank = static_cast<std::size_t>(std::ceil(theta * m - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

std::size_t VarForecastSet::hit_count() const {
  return static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1));
}

double VarForecastSet::hit_frequency() const {
  return hits.empty() ? 0.0 : static_cast<double>(hit_count()) / static_cast<double>(hits.size());
}

std::vector<int> compute_hits(std::span<const double> forecasts, std::span<const double> realized) {
  if (forecasts.size() != realized.size()) throw DataError("hits: forecast and return lengths differ");
  std::vector<int> h(forecasts.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = realized[i] <= forecasts[i] ? 1 : 0;
  return h;
}

VarForecastSet forecast_var(const FitResult& fit, std::span<const double> out_of_sample, double theta) {
  if (!fit.converged) throw DomainError("forecast_var: fit did not converge");
  if (out_of_sample.empty()) throw DataError("forecast_var: empty out-of-sample window");
  for (double v : out_of_sample)
    if (!std::isfinite(v)) throw DataError("forecast_var: non-finite out-of-sample return");

  VarForecastSet out;
  out.theta = theta;
  const auto res = fit.residuals();
  out.var_eps = residual_var_quantile(res, theta);

  std::vector<double> all(fit.observations);
  all.insert(all.end(), out_of_sample.begin(), out_of_sample.end());
  const FilterOutput f = run_filter(all, fit.model, fit.params);
  const std::size_t n = fit.observations.size();
  const std::size_t m = out_of_sample.size();
  out.forecasts.resize(m);
  out.sigma.resize(m);
  out.mu.resize(m);
  out.realized.assign(out_of_sample.begin(), out_of_sample.end());
  for (std::size_t i = 0; i < m; ++i) {
    const double s = f.sigma[n + i];
    const double mu = f.mu[n + i];
    if (!std::isfinite(s) || !(s > 0.0) || !std::isfinite(mu))
      throw InternalError("forecast_var: filter became unstable in the out-of-sample window");
    out.sigma[i] = s;
    out.mu[i] = mu;
    out.forecasts[i] = mu + s * out.var_eps;
  }
  out.hits = compute_hits(out.forecasts, out.realized);
  return out;
}

DqResult dq_test(const VarForecastSet& v, std::size_t lags) {
  const std::size_t T = v.hits.size();
  if (v.forecasts.size() != T) throw DataError("DQ: forecast and hit lengths differ");
  if (!(v.theta > 0.0 && v.theta < 1.0)) throw DomainError("DQ: theta must lie in (0, 1)");
  if (T <= lags + 2 || T - lags < lags + 2) throw DataError("DQ: out-of-sample window too short for the lag count");

  const std::size_t rows = T - lags;
  const std::size_t cols = lags + 2;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  for (std::size_t s = lags; s < T; ++s) {
    const auto r = static_cast<Eigen::Index>(s - lags);
    y(r) = v.hits[s] - v.theta;
    X(r, 0) = 1.0;
    for (std::size_t j = 1; j <= lags; ++j) X(r, static_cast<Eigen::Index>(j)) = v.hits[s - j] - v.theta;
    X(r, static_cast<Eigen::Index>(cols - 1)) = v.forecasts[s];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  const Eigen::VectorXd delta = cod.solve(y);
  const Eigen::VectorXd fitted = X * delta;

  DqResult out;
  out.df = cols;
  out.observations = rows;
  out.degenerate = cod.rank() < static_cast<Eigen::Index>(cols);
  out.statistic = std::max(0.0, fitted.squaredNorm() / (v.theta * (1.0 - v.theta)));
  out.p_value = chi2_sf(out.statistic, out.df);
  return out;
}

}  // namespace tailport
