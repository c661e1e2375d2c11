#pragma once

// One-step-ahead Value-at-Risk from a fitted volatility model, and the dynamic
// quantile (DQ) backtest of its hit sequence.

#include <cstddef>
#include <span>
#include <vector>

#include "tailport/estimation.hpp"

namespace tailport {

/// The ceil(theta m)-th smallest residual (lower order statistic, no interpolation).
double residual_var_quantile(std::span<const double> residuals, double theta);

struct VarForecastSet {
  double theta = 0.05;
  double var_eps = 0.0;               // residual quantile
  std::vector<double> forecasts;      // VaR for each out-of-sample target period
  std::vector<double> sigma;          // fitted sigma of the target period
  std::vector<double> mu;             // fitted conditional mean of the target period
  std::vector<double> realized;       // out-of-sample returns
  std::vector<int> hits;              // 1{realized <= forecast}

  std::size_t hit_count() const;
  double hit_frequency() const;
};

std::vector<int> compute_hits(std::span<const double> forecasts, std::span<const double> realized);

/// Rolls the fitted filter through the out-of-sample window at the estimated
/// parameters (no re-estimation): VaR = mu + sigma * VaR_eps for each target period.
VarForecastSet forecast_var(const FitResult& fit, std::span<const double> out_of_sample, double theta);

struct DqResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  std::size_t observations = 0;  // regression rows
  bool degenerate = false;       // rank-deficient design; pseudo-inverse used
};

inline constexpr std::size_t kDefaultDqLags = 4;

/// Centered hits H_t = Hit_t - theta regressed on [1, H_{t-1}, ..., H_{t-lags}, VaR_t]
/// (VaR_t is the forecast for period t, known at t - 1). Statistic
/// ||X delta||^2 / (theta (1 - theta)), chi-square with lags + 2 degrees of freedom.
DqResult dq_test(const VarForecastSet& v, std::size_t lags = kDefaultDqLags);

}  // namespace tailport
