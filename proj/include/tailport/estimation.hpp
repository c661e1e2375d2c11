#pragma once

// Truncated volatility filters and Gaussian quasi-maximum-likelihood fitting.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailport/dgp.hpp"
#include "tailport/tail_dependence.hpp"

namespace tailport {

struct FilterOutput {
  std::vector<double> sigma;      // fitted sigma_t
  std::vector<double> mu;         // fitted conditional mean (zero for pure volatility models)
  std::vector<double> residuals;  // (Y_t - mu_t) / sigma_t
};

/// APARCH(1,1) volatility parameters without covariate.
struct AparchParams {
  double omega = 0.0;
  double alpha_plus = 0.0;
  double alpha_minus = 0.0;
  double beta = 0.0;
};

/// sigma_t^delta = omega + alpha_plus (Y_{t-1})_+^delta + alpha_minus (Y_{t-1})_-^delta + beta sigma_{t-1}^delta,
/// started from Y_0 = 0 and sigma_0^delta = 0.
FilterOutput aparch_filter(std::span<const double> y, const AparchParams& p, double delta);
/// Residual recursion X_t = Y_t - sum phi_j Y_{t-j} + sum theta_j X_{t-j} (zero before t = 1)
/// followed by sigma_t^2 = omega + sum alpha_j X_{t-j}^2 + sum beta_j sigma_{t-j}^2 (zero before t = 1).
FilterOutput arma_garch_filter(std::span<const double> y, const ArmaGarchParams& p);
FilterOutput garch_filter(std::span<const double> y, const GarchParams& p);

enum class ModelKind { aparch11, garch11, arma_garch };

struct ArmaGarchOrders {
  std::size_t ar = 0;
  std::size_t ma = 0;
  std::size_t arch = 1;
  std::size_t garch = 1;
};

struct ModelSpec {
  ModelKind kind = ModelKind::aparch11;
  double delta = 1.0;  // aparch11 only; fixed and known
  ArmaGarchOrders orders;  // arma_garch only

  static ModelSpec aparch11(double delta = 1.0) { return {ModelKind::aparch11, delta, {}}; }
  static ModelSpec garch11() { return {ModelKind::garch11, 2.0, {}}; }
  static ModelSpec arma_garch(ArmaGarchOrders orders) { return {ModelKind::arma_garch, 2.0, orders}; }

  std::size_t parameter_count() const;
  /// Names in the order of the natural parameter vector.
  std::vector<std::string> parameter_names() const;
  void validate() const;
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Runs the model's filter at natural parameters laid out as:
///   aparch11:   [omega, alpha_plus, alpha_minus, beta]
///   garch11:    [omega, alpha, beta]
///   arma_garch: [phi_1..phi_ar, theta_1..theta_ma, omega, alpha_1..alpha_arch, beta_1..beta_garch]
FilterOutput run_filter(std::span<const double> y, const ModelSpec& model, std::span<const double> params);

inline constexpr std::size_t kDefaultBurnIn = 10;

/// Average of X_t^2 / sigma_t^2 + log sigma_t^2 over t > burn_in, X_t the mean-adjusted
/// observation. The recursion itself runs from t = 1 with zero initial values.
double qml_objective(std::span<const double> y, const ModelSpec& model, std::span<const double> params,
                     std::size_t burn_in = kDefaultBurnIn);

struct FitOptions {
  std::size_t burn_in = kDefaultBurnIn;  // also excluded from the criterion
  int restarts = 3;
  double tolerance = 1e-8;       // objective spread of the simplex
  int max_iterations = 2000;     // per simplex run
  double gradient_tolerance = 1e-4;
  std::uint64_t seed = 7;        // perturbations of the restart initials
  bool throw_on_failure = true;
  bool record_trace = false;
};

struct FitResult {
  ModelSpec model;
  std::vector<double> params;
  double objective = 0.0;
  double loglik = 0.0;  // Gaussian quasi-log-likelihood
  bool converged = false;
  int iterations = 0;
  /// Central finite-difference gradient of the objective at params, with components
  /// that push against an active bound removed.
  std::vector<double> gradient;
  std::vector<double> observations;  // the fitted series
  FilterOutput filter;
  std::size_t burn_in = 0;
  ResidualSample residuals_after_burnin;
  /// Best objective after each accepted optimizer step (when requested).
  std::vector<double> trace;

  /// Signed residuals for t = burn_in + 1 .. n.
  std::vector<double> residuals() const;
};

FitResult qml_fit(std::span<const double> y, const ModelSpec& model, const FitOptions& options = {});

ResidualSample standardized_residuals(const FitResult& fit);

/// Central finite-difference gradient (one-sided next to a zero lower bound).
std::vector<double> objective_gradient(std::span<const double> y, const ModelSpec& model,
                                       std::span<const double> params, std::size_t burn_in = kDefaultBurnIn);

/// Maps an unconstrained search vector to natural parameters and back.
std::vector<double> to_natural(const ModelSpec& model, std::span<const double> u);
std::vector<double> to_search(const ModelSpec& model, std::span<const double> params);

}  // namespace tailport
