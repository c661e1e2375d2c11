#include "tailport/baseline_diagnostics.hpp"

#include <cmath>

#include "tailport/error.hpp"
#include "tailport/limit_distributions.hpp"

namespace tailport {

AcfEstimate acf_squared(std::span<const double> residuals, std::size_t D) {
  const std::size_t n = residuals.size();
  if (D == 0) throw InvalidLag("ACF: D must be >= 1");
  if (D >= n) throw InvalidLag("ACF: D must be smaller than the sample size");
  std::vector<double> sq(n);
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(residuals[t])) throw DataError("ACF: non-finite residual");
    sq[t] = residuals[t] * residuals[t];
    mean += sq[t];
  }
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double& v : sq) {
    v -= mean;
    c0 += v * v;
  }
  if (!(c0 > 0.0)) throw DegenerateData("ACF: squared residuals have zero variance");
  AcfEstimate out;
  out.n = n;
  out.rho_hat.resize(D);
  for (std::size_t d = 1; d <= D; ++d) {
    double c = 0.0;
    for (std::size_t t = d; t < n; ++t) c += sq[t] * sq[t - d];
    out.rho_hat[d - 1] = c / c0;
  }
  return out;
}

LjungBoxResult ljung_box_from_acf(const AcfEstimate& acf) {
  const double n = static_cast<double>(acf.n);
  const std::size_t D = acf.rho_hat.size();
  if (D == 0 || D >= acf.n) throw InvalidLag("Ljung-Box: need 1 <= D < n");
  double sum = 0.0;
  for (std::size_t d = 1; d <= D; ++d) sum += acf.rho_hat[d - 1] * acf.rho_hat[d - 1] / (n - static_cast<double>(d));
  LjungBoxResult r;
  r.D = D;
  r.statistic = n * (n + 2.0) * sum;
  r.p_value = chi2_sf(r.statistic, D);
  return r;
}

LjungBoxResult ljung_box(std::span<const double> residuals, std::size_t D, bool model_residuals) {
  auto r = ljung_box_from_acf(acf_squared(residuals, D));
  r.estimation_effect_ignored = model_residuals;
  return r;
}

}  // namespace tailport
