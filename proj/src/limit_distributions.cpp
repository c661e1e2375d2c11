#include "tailport/limit_distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/normal_distribution.hpp>

#include "tailport/error.hpp"
#include "tailport/rng.hpp"

namespace tailport {

WeightFunction WeightFunction::unit() {
  return {"unit", [](double) { return 1.0; }};
}

WeightFunction WeightFunction::constant(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "const(%.17g)", c);
  return {buf, [c](double) { return c; }};
}

// ---------------------------------------------------------------------------
// chi-square

double chi2_cdf(double x, std::size_t df) {
  if (df == 0) throw DomainError("chi2_cdf: degrees of freedom must be >= 1");
  if (std::isnan(x) || x < 0.0) throw DomainError("chi2_cdf: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * static_cast<double>(df), 0.5 * x);
}

double chi2_sf(double x, std::size_t df) {
  if (df == 0) throw DomainError("chi2_sf: degrees of freedom must be >= 1");
  if (std::isnan(x) || x < 0.0) throw DomainError("chi2_sf: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi2_quantile(double p, std::size_t df) {
  if (df == 0) throw DomainError("chi2_quantile: degrees of freedom must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in (0, 1)");

  // Wilson-Hilferty seed
  const double v = static_cast<double>(df);
  const double c = 2.0 / (9.0 * v);
  const double cube = 1.0 - c + normal_quantile(p) * std::sqrt(c);
  double seed = v * cube * cube * cube;
  if (!(seed > 0.0)) seed = std::max(1e-8, v * 1e-3);

  // Work on whichever tail carries the precision.
  const bool upper = p > 0.5;
  const double target = upper ? 1.0 - p : p;
  auto f = [&](double x) { return upper ? target - chi2_sf(x, df) : chi2_cdf(x, df) - target; };

  double lo = seed, hi = seed;
  double flo = f(lo), fhi = flo;
  if (flo > 0.0) {
    while (flo > 0.0) {
      hi = lo;
      fhi = flo;
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;
      flo = f(lo);
    }
  } else {
    while (fhi < 0.0) {
      lo = hi;
      flo = fhi;
      hi = hi * 2.0 + 1.0;
      fhi = f(hi);
    }
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;

  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

// ---------------------------------------------------------------------------
// Bridge simulation

void BridgeSimConfig::validate() const {
  if (reps < 1000) throw DomainError("bridge simulation: reps must be >= 1000");
  if (grid_points < 1000) throw DomainError("bridge simulation: grid_points must be >= 1000");
  if (!(iota >= 0.0 && iota < 0.5)) throw DomainError("bridge simulation: iota must lie in [0, 1/2)");
  if (weight && !weight->psi) throw DomainError("bridge simulation: weight has no function");
}

LimitSample::LimitSample(std::vector<double> draws, std::size_t D, double iota, std::string weight_id)
    : draws_(std::move(draws)), D_(D), iota_(iota), weight_id_(std::move(weight_id)) {
  std::sort(draws_.begin(), draws_.end());
}

double LimitSample::quantile(double p) const {
  if (draws_.empty()) throw DomainError("quantile of an empty limit sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile: p must lie in [0, 1]");
  const double h = p * static_cast<double>(draws_.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, draws_.size() - 1);
  return draws_[lo] + (h - static_cast<double>(lo)) * (draws_[hi] - draws_[lo]);
}

namespace {

// Integrates psi * B^2 over [iota, 1 - iota] with the trapezoid rule on a uniform grid.
// W(iota) and W(1) - W(1 - iota) are single Gaussian draws; inside the window the path
// is built from increments. Expanding B = W - t W(1) lets the integral be accumulated
// in one pass as S1 - 2 W(1) S2 + W(1)^2 S3.
class BridgeIntegrator {
 public:
  explicit BridgeIntegrator(const BridgeSimConfig& config)
      : grid_(config.grid_points),
        sqrt_iota_(std::sqrt(config.iota)),
        h_((1.0 - 2.0 * config.iota) / static_cast<double>(config.grid_points)),
        sqrt_h_(std::sqrt(h_)) {
    w_.resize(grid_ + 1);
    wt_.resize(grid_ + 1);
    s3_ = 0.0;
    for (std::size_t i = 0; i <= grid_; ++i) {
      const double t = config.iota + static_cast<double>(i) * h_;
      double w = (i == 0 || i == grid_) ? 0.5 * h_ : h_;
      if (config.weight) {
        const double psi = config.weight->psi(t);
        if (!(psi >= 0.0) || !std::isfinite(psi))
          throw DomainError("weight function must be finite and nonnegative on the integration grid");
        w *= psi;
      }
      w_[i] = w;
      wt_[i] = w * t;
      s3_ += w * t * t;
    }
  }

  template <class Normal>
  double integral(Engine& eng, Normal& normal) const {
    double W = sqrt_iota_ * normal(eng);
    double s1 = w_[0] * W * W;
    double s2 = wt_[0] * W;
    for (std::size_t i = 1; i <= grid_; ++i) {
      W += sqrt_h_ * normal(eng);
      s1 += w_[i] * W * W;
      s2 += wt_[i] * W;
    }
    const double W1 = W + sqrt_iota_ * normal(eng);
    return s1 - 2.0 * W1 * s2 + W1 * W1 * s3_;
  }

 private:
  std::size_t grid_;
  double sqrt_iota_;
  double h_;
  double sqrt_h_;
  std::vector<double> w_;
  std::vector<double> wt_;
  double s3_;
};

unsigned resolve_jobs(unsigned jobs) {
  if (jobs != 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace

std::vector<LimitSample> simulate_limit_table(const BridgeSimConfig& config, std::size_t D_max) {
  config.validate();
  if (D_max == 0) throw DomainError("simulate_limit: D must be >= 1");

  const double work = static_cast<double>(config.reps) * static_cast<double>(config.grid_points) *
                      static_cast<double>(D_max);
  if (work > 2e13)
    throw CapacityError("bridge simulation needs " + std::to_string(work) +
                        " Gaussian draws; reduce reps, grid_points or D (limit 2e13)");
  const double bytes = static_cast<double>(config.reps) * static_cast<double>(D_max) * 8.0;
  if (bytes > 4.0 * 1024 * 1024 * 1024)
    throw CapacityError("bridge simulation would hold more than 4 GiB of draws; reduce reps or D");

  const BridgeIntegrator integrator(config);
  std::vector<std::vector<double>> draws(D_max, std::vector<double>(config.reps));

  auto work_range = [&](std::size_t begin, std::size_t end) {
    boost::random::normal_distribution<double> normal;
    for (std::size_t r = begin; r < end; ++r) {
      Engine eng = make_stream(config.seed, r);
      normal.reset();
      double acc = 0.0;
      for (std::size_t d = 0; d < D_max; ++d) {
        acc += integrator.integral(eng, normal);
        draws[d][r] = 4.0 * acc;
      }
    }
  };

  const unsigned jobs = std::min<std::size_t>(resolve_jobs(config.jobs), config.reps);
  if (jobs <= 1) {
    work_range(0, config.reps);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (config.reps + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
      const std::size_t begin = j * chunk;
      const std::size_t end = std::min(config.reps, begin + chunk);
      if (begin < end) pool.emplace_back(work_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  std::vector<LimitSample> out;
  out.reserve(D_max);
  for (std::size_t d = 0; d < D_max; ++d)
    out.emplace_back(std::move(draws[d]), d + 1, config.iota, config.weight_id());
  return out;
}

LimitSample simulate_limit(const BridgeSimConfig& config, std::size_t D) {
  auto table = simulate_limit_table(config, D);
  return std::move(table.back());
}

std::vector<double> bridge_path(std::uint64_t seed, std::uint64_t index, std::size_t grid_points) {
  if (grid_points == 0) throw DomainError("bridge_path: grid_points must be >= 1");
  Engine eng = make_stream(seed, index);
  boost::random::normal_distribution<double> normal;
  const double sqrt_h = std::sqrt(1.0 / static_cast<double>(grid_points));
  std::vector<double> path(grid_points + 1, 0.0);
  for (std::size_t i = 1; i <= grid_points; ++i) path[i] = path[i - 1] + sqrt_h * normal(eng);
  const double w1 = path[grid_points];
  for (std::size_t i = 0; i <= grid_points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(grid_points);
    path[i] -= t * w1;
  }
  path[grid_points] = 0.0;  // W(1) - 1 * W(1)
  return path;
}

double limit_p_value(double stat, const LimitSample& sample) {
  const auto& d = sample.draws();
  if (d.empty()) throw DomainError("limit_p_value: empty limit sample");
  const auto at_least = static_cast<double>(d.end() - std::lower_bound(d.begin(), d.end(), stat));
  return (1.0 + at_least) / (static_cast<double>(d.size()) + 1.0);
}

// ---------------------------------------------------------------------------
// Critical values

double CriticalValueTable::at(std::size_t D, double alpha) const {
  for (const auto& [key, value] : entries)
    if (key.first == D && std::abs(key.second - alpha) < 1e-12) return value;
  throw DomainError("critical value table has no entry for D=" + std::to_string(D));
}

const CriticalValueTable& builtin_table() {
  static const CriticalValueTable table = [] {
    CriticalValueTable t;
    t.iota = 0.1;
    t.source = CriticalValueSource::builtin_paper;
    const double a10[] = {1.340, 2.336, 3.231, 4.077, 4.896, 5.694, 6.477, 7.249, 8.011, 8.766};
    const double a05[] = {1.791, 2.890, 3.859, 4.765, 5.636, 6.480, 7.306, 8.117, 8.916, 9.705};
    const double a01[] = {2.905, 4.178, 5.273, 6.286, 7.248, 8.178, 9.082, 9.964, 10.832, 11.683};
    for (std::size_t d = 0; d < 10; ++d) {
      t.entries[{d + 1, 0.10}] = a10[d];
      t.entries[{d + 1, 0.05}] = a05[d];
      t.entries[{d + 1, 0.01}] = a01[d];
    }
    return t;
  }();
  return table;
}

std::optional<double> builtin_critical_value(std::size_t D, double alpha, double iota) {
  if (std::abs(iota - 0.1) > 1e-12 || D < 1 || D > 10) return std::nullopt;
  for (const auto& [key, value] : builtin_table().entries)
    if (key.first == D && std::abs(key.second - alpha) < 1e-12) return value;
  return std::nullopt;
}

CriticalValueTable simulate_critical_values(const BridgeSimConfig& config, std::size_t D_max,
                                            const std::vector<double>& alphas) {
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw DomainError("critical values: alpha must lie in (0, 1)");
  const auto samples = simulate_limit_table(config, D_max);
  CriticalValueTable table;
  table.iota = config.iota;
  table.source = CriticalValueSource::simulated;
  table.simulation = config;
  for (const auto& s : samples)
    for (double a : alphas) table.entries[{s.D(), a}] = s.quantile(1.0 - a);
  return table;
}

double critical_value(std::size_t D, double alpha, double iota, const BridgeSimConfig& fallback) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("critical_value: alpha must lie in (0, 1)");
  if (D == 0) throw DomainError("critical_value: D must be >= 1");
  if (auto c = builtin_critical_value(D, alpha, iota)) return *c;
  BridgeSimConfig config = fallback;
  config.iota = iota;
  return reference_sample(D, config).quantile(1.0 - alpha);
}

// ---------------------------------------------------------------------------
// Summaries and cache

LimitSample summarize(const LimitSample& sample) {
  std::vector<double> rows(kSummaryRows);
  for (std::size_t i = 0; i < kSummaryRows; ++i)
    rows[i] = sample.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(kSummaryRows));
  return LimitSample(std::move(rows), sample.D(), sample.iota(), sample.weight_id());
}

namespace {

std::string header_line(std::size_t D, double iota, const std::string& weight_id, std::size_t reps,
                        std::size_t grid, std::uint64_t seed) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "tailport-limit-summary D=%zu iota=%.17g psi=%s reps=%zu grid=%zu seed=%llu rows=%zu", D,
                iota, weight_id.c_str(), reps, grid, static_cast<unsigned long long>(seed), kSummaryRows);
  return buf;
}

}  // namespace

std::string cache_key(std::size_t D, double iota, const std::string& weight_id, std::size_t reps,
                      std::size_t grid_points, std::uint64_t seed) {
  std::string safe_id;
  for (char ch : weight_id) safe_id += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.') ? ch : '_';
  char buf[512];
  std::snprintf(buf, sizeof buf, "limit_D%zu_iota%.6g_%s_r%zu_g%zu_s%llu", D, iota, safe_id.c_str(), reps,
                grid_points, static_cast<unsigned long long>(seed));
  return buf;
}

void write_summary(const std::string& path, const LimitSample& summary, const BridgeSimConfig& config) {
  std::ofstream out(path + ".tmp");
  if (!out) return;
  out << header_line(summary.D(), config.iota, config.weight_id(), config.reps, config.grid_points, config.seed)
      << '\n';
  char buf[64];
  for (std::size_t i = 0; i < summary.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n",
                  (static_cast<double>(i) + 0.5) / static_cast<double>(summary.size()), summary.draws()[i]);
    out << buf;
  }
  out.close();
  std::error_code ec;
  std::filesystem::rename(path + ".tmp", path, ec);
}

std::optional<LimitSample> read_summary(const std::string& path, std::size_t D, double iota,
                                        const BridgeSimConfig& config) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  if (line != header_line(D, iota, config.weight_id(), config.reps, config.grid_points, config.seed))
    return std::nullopt;
  std::vector<double> rows;
  rows.reserve(kSummaryRows);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(line.c_str() + comma + 1, &end);
    if (end == line.c_str() + comma + 1) return std::nullopt;
    rows.push_back(v);
  }
  if (rows.size() != kSummaryRows) return std::nullopt;
  return LimitSample(std::move(rows), D, iota, config.weight_id());
}

BridgeSimConfig reference_config(double iota) {
  BridgeSimConfig c;
  c.reps = 100'000;
  c.grid_points = 1'000;
  c.iota = iota;
  return c;
}

const LimitSample& reference_sample(std::size_t D, const BridgeSimConfig& config) {
  static std::mutex mutex;
  static std::map<std::string, LimitSample> memo;

  const std::string key =
      cache_key(D, config.iota, config.weight_id(), config.reps, config.grid_points, config.seed);
  std::lock_guard lock(mutex);
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  std::string path;
  if (const char* dir = std::getenv("TAILPORT_CACHE_DIR"); dir != nullptr && *dir != '\0') {
    path = (std::filesystem::path(dir) / (key + ".csv")).string();
    if (auto cached = read_summary(path, D, config.iota, config))
      return memo.emplace(key, std::move(*cached)).first->second;
  }

  LimitSample summary = summarize(simulate_limit(config, D));
  if (!path.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path(), ec);
    write_summary(path, summary, config);
  }
  return memo.emplace(key, std::move(summary)).first->second;
}

}  // namespace tailport
