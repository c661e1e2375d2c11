#pragma once

// Monte Carlo harness for the size and power studies: simulate, fit, test,
// aggregate rejection frequencies.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace tailport {

enum class Design {
  aparch_x_size,
  aparch_x_power,
  garch_skewt_size,
  garch_skewt_power,
  iid_student_t,  // iid standardized t(4.1) magnitudes tested directly, no fitting
};

std::string to_string(Design d);
Design parse_design(const std::string& name);

struct ExperimentConfig {
  Design design = Design::garch_skewt_size;
  std::size_t n = 2000;
  std::size_t reps = 2000;
  std::vector<std::size_t> D_set{5};
  std::vector<double> rho_set;          // k = floor(rho n^0.99)
  std::vector<std::size_t> k_set;       // explicit k; used together with rho_set
  std::vector<double> alpha_set{0.05};
  double iota = 0.1;
  std::uint64_t master_seed = 20211231;
  std::size_t burn_in = 10;             // v: simulated and fitted, residuals discarded
  unsigned jobs = 0;                    // 0: hardware concurrency
  std::string checkpoint;               // JSON-lines file; empty disables checkpointing
  bool resume = false;

  void validate() const;
  /// Bandwidths in evaluation order: k_set followed by the rho_set rules (default rho
  /// when both are empty).
  std::vector<std::size_t> bandwidths() const;
  std::size_t max_D() const;
};

/// Parses `key = value` lines ('#' comments, comma-separated lists). Keys: design, n,
/// reps, D, k, rho, alpha, iota, seed, burn_in, jobs, checkpoint.
ExperimentConfig parse_experiment_config(const std::string& text);
std::string to_config_text(const ExperimentConfig& config);

/// Statistics of one replication. P and F are indexed [k_index * max_D + (D - 1)] and
/// hold the statistic for horizon D; LB is indexed by D - 1.
struct ReplicationRecord {
  std::size_t index = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> P;
  std::vector<double> F;
  std::vector<double> LB;
  std::vector<double> params;  // fitted parameters (empty without fitting)

  bool operator==(const ReplicationRecord&) const = default;
};

ReplicationRecord run_replication(const ExperimentConfig& config, std::size_t index);

enum class TestName { P, F, LB };
std::string to_string(TestName t);

struct RejectionCell {
  TestName test = TestName::P;
  std::size_t n = 0;
  std::size_t D = 0;
  std::size_t k = 0;  // 0 for LB
  double alpha = 0.05;
  std::size_t rejections = 0;
  std::size_t valid = 0;

  /// NaN when no valid replication exists.
  double frequency() const;
  /// sqrt(f (1 - f) / valid)
  double se() const;
};

struct RejectionTable {
  Design design = Design::garch_skewt_size;
  std::size_t reps = 0;
  std::size_t failed = 0;
  std::vector<RejectionCell> cells;

  const RejectionCell* find(TestName test, std::size_t D, std::size_t k, double alpha) const;
};

/// Critical value used for a decision: chi-square quantile for P and LB, the published
/// table (or the simulated reference law) for F.
double decision_critical_value(TestName test, std::size_t D, double alpha, double iota);

RejectionTable aggregate(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records);

struct ExperimentResult {
  RejectionTable table;
  std::vector<ReplicationRecord> records;
};

/// Runs all replications on a worker pool. Replication r uses stream (master_seed, r);
/// results do not depend on the worker count. With a checkpoint file, each finished
/// record is appended and, when resuming, records already present are reused.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Human-readable description of the replication plan.
std::string describe_plan(const ExperimentConfig& config);

enum class FigureKind { rejection_vs_k, rejection_vs_D };

/// Long-format CSV: header `test,n,k_or_D,alpha,frequency,se`, values with 6 significant
/// digits, missing cells written as NA. For rejection_vs_k the rows are at horizon
/// `fixed` (first D when absent) and a leading `#meta,default_k,<k>` row marks the
/// default bandwidth; for rejection_vs_D they are at bandwidth `fixed` (first k).
std::string emit_figure_data(const RejectionTable& table, const ExperimentConfig& config, FigureKind kind,
                             std::optional<std::size_t> fixed = std::nullopt);

}  // namespace tailport
