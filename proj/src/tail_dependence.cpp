#include "tailport/tail_dependence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailport/error.hpp"

namespace tailport {

// ---------------------------------------------------------------------------
// ResidualSample

ResidualSample::ResidualSample(std::vector<double> magnitudes) : values_(std::move(magnitudes)) {
  const std::size_t n = values_.size();
  if (n < 2) throw DataError("residual sample needs at least 2 observations");
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0) throw DataError("residual magnitudes must be finite and >= 0");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [this](std::size_t a, std::size_t b) { return values_[a] > values_[b]; });

  order_stats_.resize(n);
  for (std::size_t i = 0; i < n; ++i) order_stats_[i] = values_[order[i]];

  ranks_.resize(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && order_stats_[j + 1] == order_stats_[i]) ++j;
    for (std::size_t m = i; m <= j; ++m) ranks_[order[m]] = j + 1;
    i = j + 1;
  }
}

ResidualSample ResidualSample::from_magnitudes(std::vector<double> magnitudes) {
  return ResidualSample(std::move(magnitudes));
}

ResidualSample ResidualSample::from_residuals(std::span<const double> residuals) {
  std::vector<double> mags(residuals.size());
  std::transform(residuals.begin(), residuals.end(), mags.begin(), [](double e) { return std::abs(e); });
  return ResidualSample(std::move(mags));
}

ResidualSample ResidualSample::reversed() const {
  return ResidualSample(std::vector<double>(values_.rbegin(), values_.rend()));
}

// ---------------------------------------------------------------------------
// Bandwidth rules

Bandwidth default_k(std::size_t n, double rho) {
  if (n < 2) throw InvalidBandwidth("default_k: n must be >= 2");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidBandwidth("default_k: rho must be > 0");
  const double raw = std::floor(rho * std::pow(static_cast<double>(n), 0.99));
  if (raw < 1.0) throw InvalidBandwidth("default_k: floor(rho * n^0.99) is 0; n too small for rho");
  const auto k = std::min(static_cast<std::size_t>(raw), n - 1);
  return {k, BandwidthRule::power_law, rho};
}

Bandwidth dumouchel_k(std::size_t n) {
  if (n < 10) throw InvalidBandwidth("dumouchel_k: n must be >= 10");
  return {n / 10, BandwidthRule::dumouchel, 0.0};
}

// ---------------------------------------------------------------------------
// Estimator

namespace {

std::size_t threshold_index(std::size_t k, double scale, std::size_t n) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("tail copula: x and y must be > 0");
  const double idx = std::floor(static_cast<double>(k) * scale);
  if (idx + 1.0 > static_cast<double>(n))
    throw InvalidBandwidth("tail copula: threshold index floor(k*x)+1 exceeds n");
  return static_cast<std::size_t>(idx);
}

void check_k(Bandwidth k) {
  if (k.k == 0) throw InvalidBandwidth("bandwidth k must be >= 1");
}

void check_lag(std::size_t d, std::size_t n) {
  if (d == 0) throw InvalidLag("lag must be >= 1");
  if (d >= n) throw InvalidLag("lag " + std::to_string(d) + " must be < n = " + std::to_string(n));
}

std::size_t count_joint(std::span<const std::size_t> ranks, std::size_t d, std::size_t a, std::size_t b) {
  std::size_t count = 0;
  for (std::size_t t = d; t < ranks.size(); ++t) count += (ranks[t] <= a && ranks[t - d] <= b) ? 1 : 0;
  return count;
}

}  // namespace

double tail_copula_at(const ResidualSample& sample, Bandwidth k, std::size_t d, double x, double y) {
  check_k(k);
  const std::size_t n = sample.size();
  check_lag(d, n);
  const std::size_t a = threshold_index(k.k, x, n);
  const std::size_t b = threshold_index(k.k, y, n);
  return static_cast<double>(count_joint(sample.exceedance_ranks(), d, a, b)) / static_cast<double>(k.k);
}

std::vector<double> tail_copula_lags(const ResidualSample& sample, Bandwidth k, std::size_t D, double x,
                                     double y) {
  if (D == 0) throw InvalidLag("lag horizon D must be >= 1");
  std::vector<double> out(D);
  for (std::size_t d = 1; d <= D; ++d) out[d - 1] = tail_copula_at(sample, k, d, x, y);
  return out;
}

Band null_band(std::size_t n, std::size_t k, double alpha, double x, double y) {
  if (n == 0) throw DomainError("null_band: n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("null_band: alpha must lie in (0, 1)");
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("null_band: x and y must be > 0");
  const double nd = static_cast<double>(n);
  const double center = static_cast<double>(k) / nd * x * y;
  const double half = normal_quantile(1.0 - 0.5 * alpha) * std::sqrt(x * y / nd);
  return {center - half, center + half};
}

std::string to_string(TestKind kind) {
  switch (kind) {
    case TestKind::pointwise_P: return "pointwise_P";
    case TestKind::functional_F: return "functional_F";
    case TestKind::weighted_WF: return "weighted_WF";
  }
  return "unknown";
}

bool TailTestReport::rejects(double alpha) const {
  for (const auto& [a, c] : critical_values)
    if (std::abs(a - alpha) < 1e-12) return statistic > c;
  return p_value <= alpha;
}

// ---------------------------------------------------------------------------
// Statistics

std::vector<double> pointwise_terms(const ResidualSample& sample, Bandwidth k, std::size_t D, double x,
                                    double y) {
  const auto est = tail_copula_lags(sample, k, D, x, y);
  const double n = static_cast<double>(sample.size());
  const double null_value = static_cast<double>(k.k) / n * x * y;
  std::vector<double> terms(D);
  for (std::size_t d = 0; d < D; ++d) {
    const double dev = est[d] - null_value;
    terms[d] = n / (x * y) * dev * dev;
  }
  return terms;
}

std::vector<double> functional_terms(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota,
                                     const WeightFunction& weight) {
  check_k(k);
  if (!(iota > 0.0 && iota < 0.5)) throw DomainError("functional statistic: iota must lie in (0, 1/2)");
  if (!weight.psi) throw DomainError("functional statistic: weight has no function");
  const std::size_t n = sample.size();
  if (D == 0) throw InvalidLag("lag horizon D must be >= 1");
  check_lag(D, n);
  const double kd = static_cast<double>(k.k);
  const double nd = static_cast<double>(n);
  const double a_max_real = std::floor(2.0 * kd * (1.0 - iota));
  if (a_max_real + 1.0 > nd)
    throw InvalidBandwidth("functional statistic: floor(2k(1-iota))+1 exceeds n");
  const auto a_max = static_cast<std::size_t>(a_max_real);

  // Breakpoints: floor(k(2-2z)) and floor(2kz) both change only at z = j/(2k).
  std::vector<double> knots{iota};
  for (auto j = static_cast<std::size_t>(std::floor(iota * 2.0 * kd)) + 1;; ++j) {
    const double z = static_cast<double>(j) / (2.0 * kd);
    if (z >= 1.0 - iota) break;
    if (z > iota) knots.push_back(z);
  }
  knots.push_back(1.0 - iota);

  // Per lag, the pairs that can ever count anywhere on the path.
  const auto ranks = sample.exceedance_ranks();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs(D);
  for (std::size_t d = 1; d <= D; ++d)
    for (std::size_t t = d; t < n; ++t)
      if (ranks[t] <= a_max && ranks[t - d] <= a_max) pairs[d - 1].emplace_back(ranks[t], ranks[t - d]);

  static constexpr double kNode = 0.77459666924148337704;  // sqrt(3/5)
  static constexpr double kOuter = 5.0 / 9.0;
  static constexpr double kInner = 8.0 / 9.0;

  std::vector<double> terms(D, 0.0);
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    const double z0 = knots[s];
    const double z1 = knots[s + 1];
    if (!(z1 > z0)) continue;
    const double mid = 0.5 * (z0 + z1);
    const double half = 0.5 * (z1 - z0);
    const auto a = static_cast<std::size_t>(std::floor(kd * (2.0 - 2.0 * mid)));
    const auto b = static_cast<std::size_t>(std::floor(2.0 * kd * mid));

    const double nodes[3] = {mid - half * kNode, mid, mid + half * kNode};
    const double gl[3] = {kOuter, kInner, kOuter};
    double psi[3];
    double null_value[3];
    for (int i = 0; i < 3; ++i) {
      psi[i] = weight.psi(nodes[i]);
      if (!(psi[i] >= 0.0) || !std::isfinite(psi[i]))
        throw DomainError("weight function must be finite and nonnegative on the integration grid");
      null_value[i] = kd / nd * 4.0 * nodes[i] * (1.0 - nodes[i]);
    }

    for (std::size_t d = 0; d < D; ++d) {
      std::size_t count = 0;
      for (const auto& [r_now, r_lag] : pairs[d]) count += (r_now <= a && r_lag <= b) ? 1 : 0;
      const double c = static_cast<double>(count) / kd;
      double seg = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double dev = c - null_value[i];
        seg += gl[i] * psi[i] * dev * dev;
      }
      terms[d] += half * seg;
    }
  }
  for (double& t : terms) t *= nd;
  return terms;
}

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TailTestReport portmanteau_P(const ResidualSample& sample, Bandwidth k, std::size_t D, double x, double y,
                             const std::vector<double>& alphas) {
  TailTestReport r;
  r.kind = TestKind::pointwise_P;
  r.n = sample.size();
  r.D = D;
  r.k = k.k;
  r.x = x;
  r.y = y;
  r.per_lag = tail_copula_lags(sample, k, D, x, y);
  r.per_lag_contribution = pointwise_terms(sample, k, D, x, y);
  r.statistic = sum(r.per_lag_contribution);
  r.p_value = chi2_sf(r.statistic, D);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    r.critical_values[a] = chi2_quantile(1.0 - a, D);
  }
  r.reference = "chi2(" + std::to_string(D) + ")";
  r.degenerate_input = sample.all_tied();
  return r;
}

namespace {

TailTestReport functional_report(TestKind kind, const ResidualSample& sample, Bandwidth k, std::size_t D,
                                 double iota, const WeightFunction& weight) {
  TailTestReport r;
  r.kind = kind;
  r.n = sample.size();
  r.D = D;
  r.k = k.k;
  r.iota = iota;
  r.per_lag_contribution = functional_terms(sample, k, D, iota, weight);
  r.statistic = sum(r.per_lag_contribution);
  r.per_lag = tail_copula_lags(sample, k, D, 1.0, 1.0);
  r.degenerate_input = sample.all_tied();
  return r;
}

std::string describe(const LimitSample& ref, const char* prefix) {
  return std::string(prefix) + "(D=" + std::to_string(ref.D()) + ", psi=" + ref.weight_id() +
         ", draws=" + std::to_string(ref.size()) + ")";
}

}  // namespace

TailTestReport functional_F(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota,
                            const FunctionalOptions& options) {
  TailTestReport r = functional_report(TestKind::functional_F, sample, k, D, iota, WeightFunction::unit());
  const LimitSample& ref =
      options.reference != nullptr ? *options.reference : reference_sample(D, reference_config(iota));
  if (ref.D() != D || std::abs(ref.iota() - iota) > 1e-12 || ref.weight_id() != "unit")
    throw DomainError("functional_F: reference limit sample does not match (D, iota, unit weight)");
  r.p_value = limit_p_value(r.statistic, ref);
  bool all_builtin = true;
  for (double a : options.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    if (auto c = builtin_critical_value(D, a, iota)) {
      r.critical_values[a] = *c;
    } else {
      r.critical_values[a] = ref.quantile(1.0 - a);
      all_builtin = false;
    }
  }
  r.reference = describe(ref, all_builtin ? "builtin table; p-value from simulated limit"
                                          : "simulated limit");
  return r;
}

TailTestReport weighted_functional_WF(const ResidualSample& sample, Bandwidth k, std::size_t D, double iota,
                                      const WeightFunction& weight, const std::vector<double>& alphas,
                                      BridgeSimConfig limit_config) {
  TailTestReport r = functional_report(TestKind::weighted_WF, sample, k, D, iota, weight);
  limit_config.iota = iota;
  limit_config.weight = weight;
  const LimitSample& ref = reference_sample(D, limit_config);
  r.p_value = limit_p_value(r.statistic, ref);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    r.critical_values[a] = ref.quantile(1.0 - a);
  }
  r.reference = describe(ref, "simulated weighted limit");
  return r;
}

}  // namespace tailport
