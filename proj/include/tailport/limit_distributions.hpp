#pragma once

// Reference laws for the extremal-dependence portmanteau tests: the chi-square
// law of the pointwise statistic and the simulated law of
//
//     4 * sum_{d=1..D} int_{[iota, 1-iota]} psi(z) B_d(z)^2 dz
//
// for independent Brownian bridges B_d, which is the limit of the functional
// statistic.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tailport {

/// Nonnegative weight on the integration path; `id` names it in cache keys and reports.
struct WeightFunction {
  std::string id;
  std::function<double(double)> psi;

  static WeightFunction unit();
  static WeightFunction constant(double c);
  bool is_unit() const { return id == "unit"; }
};

double chi2_cdf(double x, std::size_t df);
double chi2_quantile(double p, std::size_t df);
/// Upper tail 1 - chi2_cdf, computed without cancellation.
double chi2_sf(double x, std::size_t df);

double normal_quantile(double p);

struct BridgeSimConfig {
  std::size_t reps = 1'000'000;
  std::size_t grid_points = 10'000;  // intervals on [iota, 1 - iota]
  std::uint64_t seed = 20211231;
  double iota = 0.1;
  std::optional<WeightFunction> weight;  // unit weight when empty
  unsigned jobs = 0;                     // 0: hardware concurrency

  void validate() const;
  std::string weight_id() const { return weight ? weight->id : "unit"; }
};

/// Sorted draws of the functional limit for one lag horizon.
class LimitSample {
 public:
  LimitSample() = default;
  LimitSample(std::vector<double> draws, std::size_t D, double iota, std::string weight_id);

  const std::vector<double>& draws() const noexcept { return draws_; }
  std::size_t size() const noexcept { return draws_.size(); }
  std::size_t D() const noexcept { return D_; }
  double iota() const noexcept { return iota_; }
  const std::string& weight_id() const noexcept { return weight_id_; }

  /// Empirical quantile, type-7 interpolation.
  double quantile(double p) const;

 private:
  std::vector<double> draws_;
  std::size_t D_ = 0;
  double iota_ = 0.0;
  std::string weight_id_ = "unit";
};

/// Draws for D = 1..D_max from one pass: replication r owns stream (seed, r) and
/// generates its D_max bridges in order, so entry D-1 equals simulate_limit(config, D).
std::vector<LimitSample> simulate_limit_table(const BridgeSimConfig& config, std::size_t D_max);
LimitSample simulate_limit(const BridgeSimConfig& config, std::size_t D);

/// One bridge path on the uniform grid of `grid_points` intervals over [0, 1],
/// B(t_i) = W(t_i) - t_i W(1) from Gaussian increments. Test and diagnostic helper.
std::vector<double> bridge_path(std::uint64_t seed, std::uint64_t index, std::size_t grid_points);

double limit_p_value(double stat, const LimitSample& sample);

enum class CriticalValueSource { builtin_paper, simulated };

struct CriticalValueTable {
  double iota = 0.1;
  std::map<std::pair<std::size_t, double>, double> entries;  // (D, alpha) -> c
  CriticalValueSource source = CriticalValueSource::builtin_paper;
  std::optional<BridgeSimConfig> simulation;  // set when simulated

  double at(std::size_t D, double alpha) const;
};

/// Table of published critical values for iota = 0.1, D = 1..10, alpha in {10%, 5%, 1%}.
const CriticalValueTable& builtin_table();
std::optional<double> builtin_critical_value(std::size_t D, double alpha, double iota);

CriticalValueTable simulate_critical_values(const BridgeSimConfig& config, std::size_t D_max,
                                            const std::vector<double>& alphas);

/// Builtin value when (D, alpha, iota) is tabulated, otherwise the quantile of a
/// simulated (and cached) limit sample drawn with `fallback`.
double critical_value(std::size_t D, double alpha, double iota,
                      const BridgeSimConfig& fallback = BridgeSimConfig{});

// ---------------------------------------------------------------------------
// Quantile summaries and the on-disk cache.

/// Number of quantile rows kept in a summary.
inline constexpr std::size_t kSummaryRows = 10'000;

/// Compresses a sample to kSummaryRows quantiles at probabilities (i + 0.5) / rows.
LimitSample summarize(const LimitSample& sample);

std::string cache_key(std::size_t D, double iota, const std::string& weight_id, std::size_t reps,
                      std::size_t grid_points, std::uint64_t seed);
void write_summary(const std::string& path, const LimitSample& summary, const BridgeSimConfig& config);
std::optional<LimitSample> read_summary(const std::string& path, std::size_t D, double iota,
                                        const BridgeSimConfig& config);

/// Configuration used for p-values attached to functional test reports.
BridgeSimConfig reference_config(double iota = 0.1);

/// Memoized quantile summary of the limit law. Consults the directory named by
/// the TAILPORT_CACHE_DIR environment variable when set. Thread-safe.
const LimitSample& reference_sample(std::size_t D, const BridgeSimConfig& config);

}  // namespace tailport
