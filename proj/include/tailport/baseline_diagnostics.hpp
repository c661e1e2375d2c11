#pragma once

// Autocorrelations of squared residuals and the uncorrected Ljung-Box statistic.

#include <cstddef>
#include <span>
#include <vector>

namespace tailport {

struct AcfEstimate {
  std::size_t n = 0;
  std::vector<double> rho_hat;  // lags 1..D
};

/// Sample autocorrelations of e_t^2 at lags 1..D.
AcfEstimate acf_squared(std::span<const double> residuals, std::size_t D);

struct LjungBoxResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t D = 0;
  /// Set when the statistic was computed on fitted-model residuals: the chi-square
  /// reference ignores the estimation effect.
  bool estimation_effect_ignored = false;
};

/// n(n+2) sum_d rho_d^2 / (n - d), referred to chi-square with D degrees of freedom.
LjungBoxResult ljung_box_from_acf(const AcfEstimate& acf);
LjungBoxResult ljung_box(std::span<const double> residuals, std::size_t D, bool model_residuals = false);

}  // namespace tailport
