#pragma once

// Simulators for the conditional location-scale processes used in the size and
// power studies, together with their innovation samplers.

#include <cstddef>
#include <variant>
#include <vector>

#include "tailport/rng.hpp"

namespace tailport {

/// Steps discarded before any emitted observation.
inline constexpr std::size_t kWarmup = 1000;

struct AparchXParams {
  double omega = 0.046;
  double alpha_plus = 0.027;
  double alpha_minus = 0.092;
  double beta = 0.843;
  double pi = 0.0;
  double delta = 1.0;

  void validate() const;
  /// Null parameter vector (no covariate effect).
  static AparchXParams size_design() { return {}; }
  /// Alternative with covariate loading 0.089.
  static AparchXParams power_design() {
    AparchXParams p;
    p.pi = 0.089;
    return p;
  }
};

struct GarchParams {
  double omega = 0.046;
  double alpha = 0.127;
  double beta = 0.843;

  void validate() const;
};

/// ARMA(p̄, q̄) mean with GARCH(p, q) errors:
///   Y_t = sum phi_j Y_{t-j} + X_t - sum theta_j X_{t-j},
///   X_t = sigma_t eps_t,  sigma_t^2 = omega + sum alpha_j X_{t-j}^2 + sum beta_j sigma_{t-j}^2.
struct ArmaGarchParams {
  std::vector<double> phi;
  std::vector<double> theta_ma;
  double omega = 0.05;
  std::vector<double> alpha{0.1};
  std::vector<double> beta{0.85};

  void validate() const;
};

/// Hansen's skewed-t with skewness lambda in (-1, 1) and tail parameter eta > 2,
/// standardized to mean 0 and variance 1.
class SkewedT {
 public:
  SkewedT(double lambda, double eta);

  double lambda() const noexcept { return lambda_; }
  double eta() const noexcept { return eta_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double c() const noexcept { return c_; }

  double density(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;

 private:
  double lambda_;
  double eta_;
  double a_;
  double b_;
  double c_;
};

/// Latent recursions eta~_t = a1 + b1 Y_{t-1} + c1 eta~_{t-1} (same for lambda~ with
/// a2, b2, c2), mapped to (2, 30) and (-1, 1).
struct TvSkewTParams {
  double a1 = -3.0, b1 = 0.0, c1 = 0.0;
  double a2 = -1.0, b2 = 0.0, c2 = 0.0;

  void validate() const;
  static TvSkewTParams null_design() { return {}; }
  static TvSkewTParams alternative_design() { return {-3.0, -6.0, 0.6, -1.0, -2.0, 0.6}; }
};

/// L + (U - L) / (1 + exp(-x))
double logistic_map(double x, double L, double U);
/// Map applied to the latent skew-t recursions: logistic_map(-x, L, U). This is the
/// convention under which the null constants (-3, -1) give eta = 28.67..., lambda = 0.46...
/// The result is strictly inside (L, U) even when the logistic saturates.
double tv_transform(double latent, double L, double U);

double skewed_t_density(double x, const SkewedT& p);
double draw_skewed_t(Engine& rng, const SkewedT& p);
/// Student-t draw scaled by sqrt((nu - 2) / nu) to unit variance.
double draw_std_student_t(Engine& rng, double nu);
double draw_std_normal(Engine& rng);

struct NormalInnovation {};
struct StudentTInnovation {
  double nu = 4.1;
};
struct SkewedTInnovation {
  double lambda = 0.0;
  double eta = 30.0;
};
using Innovation = std::variant<NormalInnovation, StudentTInnovation, SkewedTInnovation>;

double draw_innovation(Engine& rng, const Innovation& innovation);

/// x_t = exp(z_t), z_t = 0.9 z_{t-1} + e_t with z_0 from the stationary law; returns
/// n_total values after kWarmup discarded steps.
std::vector<double> simulate_covariate(Engine& rng, std::size_t n_total);

struct AparchXPath {
  std::vector<double> returns;    // Y_{-v+1}, ..., Y_n
  std::vector<double> sigma;      // true sigma_t
  std::vector<double> covariate;  // x_t on the same index
};

/// APARCH-X(1,1) with standardized Student-t(4.1) innovations; emits n + v observations.
AparchXPath simulate_aparch_x(Engine& rng, const AparchXParams& p, std::size_t n, std::size_t v,
                              const Innovation& innovation = StudentTInnovation{4.1});

struct GarchTvPath {
  std::vector<double> returns;
  std::vector<double> sigma;
  std::vector<double> eta;
  std::vector<double> lambda;
};

/// GARCH(1,1) driven by skewed-t innovations whose (lambda_t, eta_t) follow the latent recursions.
GarchTvPath simulate_garch_tvskewt(Engine& rng, const GarchParams& g, const TvSkewTParams& tv, std::size_t n);

struct GarchPath {
  std::vector<double> returns;  // Y_t
  std::vector<double> errors;   // X_t
  std::vector<double> sigma;    // true sigma_t
};

/// GARCH(p, q) errors (ARMA part ignored).
GarchPath simulate_garch(Engine& rng, const ArmaGarchParams& p, std::size_t n,
                         const Innovation& innovation = NormalInnovation{});
GarchPath simulate_arma_garch(Engine& rng, const ArmaGarchParams& p, std::size_t n,
                              const Innovation& innovation = NormalInnovation{});

/// True when 1 - sum c_j z^j has a root within `tol` of the unit circle.
bool has_unit_circle_root(const std::vector<double>& coefficients, double tol = 1e-8);

}  // namespace tailport
