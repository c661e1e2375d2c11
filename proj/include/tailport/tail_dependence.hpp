#pragma once

// Residual-based pre-asymptotic tail copula estimator and the pointwise and
// functional portmanteau statistics built on it.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailport/limit_distributions.hpp"

namespace tailport {

/// Absolute standardized residuals with cached descending order statistics.
/// Immutable after construction.
class ResidualSample {
 public:
  /// Takes magnitudes as given; every entry must be finite and >= 0, and n >= 2.
  static ResidualSample from_magnitudes(std::vector<double> magnitudes);
  /// Takes signed residuals and stores their absolute values.
  static ResidualSample from_residuals(std::span<const double> residuals);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  /// |e|_(1) >= ... >= |e|_(n)
  std::span<const double> order_stats() const noexcept { return order_stats_; }
  /// For each t, the number of entries >= values()[t]. Entry t exceeds |e|_(j+1)
  /// strictly exactly when exceedance_rank(t) <= j.
  std::span<const std::size_t> exceedance_ranks() const noexcept { return ranks_; }
  /// True when every magnitude is equal.
  bool all_tied() const noexcept { return order_stats_.front() == order_stats_.back(); }

  /// Sample in reverse time order.
  ResidualSample reversed() const;

 private:
  explicit ResidualSample(std::vector<double> magnitudes);

  std::vector<double> values_;
  std::vector<double> order_stats_;
  std::vector<std::size_t> ranks_;
};

enum class BandwidthRule { power_law, dumouchel, explicit_k };

struct Bandwidth {
  std::size_t k = 0;
  BandwidthRule rule = BandwidthRule::explicit_k;
  double rho = 0.0;  // power_law only

  static Bandwidth fixed(std::size_t k) { return {k, BandwidthRule::explicit_k, 0.0}; }
};

inline constexpr double kDefaultRho = 0.11;
inline constexpr std::size_t kDefaultLags = 5;
inline constexpr double kDefaultIota = 0.1;

/// k = floor(rho * n^0.99), capped at n - 1.
Bandwidth default_k(std::size_t n, double rho = kDefaultRho);
/// k = floor(0.1 * n).
Bandwidth dumouchel_k(std::size_t n);

/// (1/k) #{t in [d+1, n] : |e_t| > |e|_(floor(kx)+1), |e_{t-d}| > |e|_(floor(ky)+1)}
double tail_copula_at(const ResidualSample& sample, Bandwidth k, std::size_t d, double x, double y);

/// Estimates at lags 1..D for one (x, y).
std::vector<double> tail_copula_lags(const ResidualSample& sample, Bandwidth k, std::size_t D, double x,
                                     double y);

/// Null band (k/n)xy -/+ z_{1-alpha/2} sqrt(xy/n) for a single lag estimate.
struct Band {
  double lo;
  double hi;
};
Band null_band(std::size_t n, std::size_t k, double alpha, double x = 1.0, double y = 1.0);

enum class TestKind { pointwise_P, functional_F, weighted_WF };
std::string to_string(TestKind kind);

struct TailTestReport {
  TestKind kind = TestKind::pointwise_P;
  double statistic = 0.0;
  std::size_t n = 0;
  std::size_t D = 0;
  std::size_t k = 0;
  std::optional<double> iota;  // functional kinds
  std::optional<double> x;     // pointwise kind
  std::optional<double> y;
  /// Pointwise: estimates at (x, y). Functional: estimates at (1, 1), the path midpoint.
  std::vector<double> per_lag;
  /// Statistic contribution of each lag; sums to `statistic`.
  std::vector<double> per_lag_contribution;
  std::map<double, double> critical_values;  // alpha -> c
  double p_value = 1.0;
  std::string reference;   // description of the reference law
  bool degenerate_input = false;  // all residual magnitudes tied

  bool rejects(double alpha) const;
};

inline const std::vector<double> kDefaultAlphas{0.10, 0.05, 0.01};

/// Per-lag terms (n/(xy)) [est_d - (k/n)xy]^2, d = 1..D.
std::vector<double> pointwise_terms(const ResidualSample& sample, Bandwidth k, std::size_t D, double x,
                                    double y);

/// Per-lag terms n int_{[iota,1-iota]} psi(z) [est_d(2-2z, 2z) - (k/n)(2-2z)2z]^2 dz, d = 1..D,
/// integrated exactly segment by segment (3-point Gauss-Legendre between breakpoints j/(2k)).
std::vector<double> functional_terms(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota,
                                     const WeightFunction& weight = WeightFunction::unit());

TailTestReport portmanteau_P(const ResidualSample& sample, Bandwidth k, std::size_t D, double x = 1.0,
                             double y = 1.0, const std::vector<double>& alphas = kDefaultAlphas);

struct FunctionalOptions {
  std::vector<double> alphas = kDefaultAlphas;
  /// Limit law for p-values; reference_sample(D, reference_config(iota)) when empty.
  const LimitSample* reference = nullptr;
};

TailTestReport functional_F(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota = kDefaultIota,
                            const FunctionalOptions& options = {});

/// Weighted functional statistic; p-value and critical values come from a limit sample
/// simulated with the same weight under `limit_config` (its iota and weight are overridden).
TailTestReport weighted_functional_WF(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota,
                                      const WeightFunction& weight,
                                      const std::vector<double>& alphas = kDefaultAlphas,
                                      BridgeSimConfig limit_config = reference_config());

}  // namespace tailport
