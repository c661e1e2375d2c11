#include "tailport/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tailport/baseline_diagnostics.hpp"
#include "tailport/dgp.hpp"
#include "tailport/error.hpp"
#include "tailport/estimation.hpp"
#include "tailport/limit_distributions.hpp"
#include "tailport/rng.hpp"
#include "tailport/tail_dependence.hpp"

namespace tailport {

std::string to_string(Design d) {
  switch (d) {
    case Design::aparch_x_size: return "aparch_x_size";
    case Design::aparch_x_power: return "aparch_x_power";
    case Design::garch_skewt_size: return "garch_skewt_size";
    case Design::garch_skewt_power: return "garch_skewt_power";
    case Design::iid_student_t: return "iid_student_t";
  }
  return "unknown";
}

Design parse_design(const std::string& name) {
  for (Design d : {Design::aparch_x_size, Design::aparch_x_power, Design::garch_skewt_size,
                   Design::garch_skewt_power, Design::iid_student_t})
    if (to_string(d) == name) return d;
  throw DomainError("unknown design '" + name + "'");
}

std::string to_string(TestName t) {
  switch (t) {
    case TestName::P: return "P";
    case TestName::F: return "F";
    case TestName::LB: return "LB";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (reps < 1) throw DomainError("experiment: reps must be >= 1");
  if (n < 20) throw DomainError("experiment: n must be >= 20");
  if (D_set.empty()) throw DomainError("experiment: D set is empty");
  for (auto D : D_set)
    if (D == 0 || D >= n) throw InvalidLag("experiment: every D must satisfy 1 <= D < n");
  if (alpha_set.empty()) throw DomainError("experiment: alpha set is empty");
  for (double a : alpha_set)
    if (!(a > 0.0 && a < 1.0)) throw DomainError("experiment: every alpha must lie in (0, 1)");
  if (!(iota > 0.0 && iota < 0.5)) throw DomainError("experiment: iota must lie in (0, 0.5)");
  for (double r : rho_set)
    if (!(r > 0.0)) throw DomainError("experiment: rho must be > 0");
  for (auto k : bandwidths())
    if (k == 0 || k >= n) throw InvalidBandwidth("experiment: every k must satisfy 1 <= k < n");
}

std::vector<std::size_t> ExperimentConfig::bandwidths() const {
  std::vector<std::size_t> ks = k_set;
  if (rho_set.empty() && k_set.empty()) ks.push_back(default_k(n).k);
  for (double r : rho_set) ks.push_back(default_k(n, r).k);
  return ks;
}

std::size_t ExperimentConfig::max_D() const { return *std::max_element(D_set.begin(), D_set.end()); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, std::size_t line) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw ParseError(line, "invalid number '" + text + "'");
  if constexpr (std::is_unsigned_v<T>)
    if (text.find('-') != std::string::npos) throw ParseError(line, "negative value '" + text + "'");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(line, "duplicate key '" + key + "'");
    try {
      if (key == "design") {
        c.design = parse_design(value);
      } else if (key == "n") {
        c.n = parse_number<std::size_t>(value, line);
      } else if (key == "reps") {
        c.reps = parse_number<std::size_t>(value, line);
      } else if (key == "D") {
        c.D_set.clear();
        for (auto& s : split_list(value)) c.D_set.push_back(parse_number<std::size_t>(s, line));
      } else if (key == "k") {
        c.k_set.clear();
        for (auto& s : split_list(value)) c.k_set.push_back(parse_number<std::size_t>(s, line));
      } else if (key == "rho") {
        c.rho_set.clear();
        for (auto& s : split_list(value)) c.rho_set.push_back(parse_number<double>(s, line));
      } else if (key == "alpha") {
        c.alpha_set.clear();
        for (auto& s : split_list(value)) c.alpha_set.push_back(parse_number<double>(s, line));
      } else if (key == "iota") {
        c.iota = parse_number<double>(value, line);
      } else if (key == "seed") {
        c.master_seed = parse_number<std::uint64_t>(value, line);
      } else if (key == "burn_in") {
        c.burn_in = parse_number<std::size_t>(value, line);
      } else if (key == "jobs") {
        c.jobs = parse_number<unsigned>(value, line);
      } else if (key == "checkpoint") {
        c.checkpoint = value;
      } else {
        throw ParseError(line, "unknown key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  }
  c.validate();
  return c;
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto list = [&](const auto& v, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
  };
  auto integer = [](std::size_t x) { return std::to_string(x); };
  os << "design = " << to_string(c.design) << "\n"
     << "n = " << c.n << "\n"
     << "reps = " << c.reps << "\n"
     << "D = " << list(c.D_set, integer) << "\n";
  if (!c.k_set.empty()) os << "k = " << list(c.k_set, integer) << "\n";
  if (!c.rho_set.empty()) os << "rho = " << list(c.rho_set, format_double) << "\n";
  os << "alpha = " << list(c.alpha_set, format_double) << "\n"
     << "iota = " << format_double(c.iota) << "\n"
     << "seed = " << c.master_seed << "\n"
     << "burn_in = " << c.burn_in << "\n";
  if (!c.checkpoint.empty()) os << "checkpoint = " << c.checkpoint << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Replications

namespace {

std::vector<double> cumulative(std::vector<double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
  return v;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& config, std::size_t index) {
  ReplicationRecord rec;
  rec.index = index;
  Engine rng = make_stream(config.master_seed, index);
  const std::size_t n = config.n;
  const std::size_t v = config.burn_in;
  std::vector<double> residuals;

  try {
    auto fit_and_keep = [&](const std::vector<double>& y, const ModelSpec& model) {
      FitOptions opts;
      opts.burn_in = v;
      opts.throw_on_failure = false;
      FitResult fit = qml_fit(y, model, opts);
      rec.params = fit.params;
      if (!fit.converged) {
        rec.failed = true;
        rec.failure = "fit did not converge";
        return;
      }
      residuals = fit.residuals();
    };

    switch (config.design) {
      case Design::iid_student_t:
        residuals.resize(n);
        for (auto& e : residuals) e = draw_std_student_t(rng, 4.1);
        break;
      case Design::aparch_x_size:
      case Design::aparch_x_power: {
        const auto p = config.design == Design::aparch_x_size ? AparchXParams::size_design()
                                                              : AparchXParams::power_design();
        const auto path = simulate_aparch_x(rng, p, n, v);
        fit_and_keep(path.returns, ModelSpec::aparch11(p.delta));
        break;
      }
      case Design::garch_skewt_size:
      case Design::garch_skewt_power: {
        const auto tv = config.design == Design::garch_skewt_size ? TvSkewTParams::null_design()
                                                                  : TvSkewTParams::alternative_design();
        const auto path = simulate_garch_tvskewt(rng, GarchParams{}, tv, n + v);
        fit_and_keep(path.returns, ModelSpec::garch11());
        break;
      }
    }
    if (rec.failed) return rec;

    const auto sample = ResidualSample::from_residuals(residuals);
    const auto ks = config.bandwidths();
    const std::size_t Dmax = config.max_D();
    rec.P.reserve(ks.size() * Dmax);
    rec.F.reserve(ks.size() * Dmax);
    for (std::size_t k : ks) {
      const auto p = cumulative(pointwise_terms(sample, Bandwidth::fixed(k), Dmax, 1.0, 1.0));
      const auto f = cumulative(functional_terms(sample, Bandwidth::fixed(k), Dmax, config.iota));
      rec.P.insert(rec.P.end(), p.begin(), p.end());
      rec.F.insert(rec.F.end(), f.begin(), f.end());
    }
    const auto acf = acf_squared(residuals, Dmax);
    const double nn = static_cast<double>(residuals.size());
    double sum = 0.0;
    for (std::size_t d = 1; d <= Dmax; ++d) {
      sum += acf.rho_hat[d - 1] * acf.rho_hat[d - 1] / (nn - static_cast<double>(d));
      rec.LB.push_back(nn * (nn + 2.0) * sum);
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.P.clear();
    rec.F.clear();
    rec.LB.clear();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Aggregation

double RejectionCell::frequency() const {
  if (valid == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(rejections) / static_cast<double>(valid);
}

double RejectionCell::se() const {
  const double f = frequency();
  if (std::isnan(f)) return f;
  return std::sqrt(f * (1.0 - f) / static_cast<double>(valid));
}

const RejectionCell* RejectionTable::find(TestName test, std::size_t D, std::size_t k, double alpha) const {
  for (const auto& c : cells)
    if (c.test == test && c.D == D && c.k == k && c.alpha == alpha) return &c;
  return nullptr;
}

double decision_critical_value(TestName test, std::size_t D, double alpha, double iota) {
  if (test == TestName::F) {
    if (auto c = builtin_critical_value(D, alpha, iota)) return *c;
    return reference_sample(D, reference_config(iota)).quantile(1.0 - alpha);
  }
  return chi2_quantile(1.0 - alpha, D);
}

RejectionTable aggregate(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records) {
  RejectionTable t;
  t.design = config.design;
  t.reps = records.size();
  const auto ks = config.bandwidths();
  const std::size_t Dmax = config.max_D();
  for (const auto& r : records)
    if (r.failed) ++t.failed;

  for (std::size_t D : config.D_set)
    for (double alpha : config.alpha_set) {
      for (TestName test : {TestName::P, TestName::F}) {
        const double crit = decision_critical_value(test, D, alpha, config.iota);
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
          RejectionCell cell{test, config.n, D, ks[ki], alpha, 0, 0};
          for (const auto& r : records) {
            if (r.failed) continue;
            const auto& stats = test == TestName::P ? r.P : r.F;
            ++cell.valid;
            if (stats[ki * Dmax + D - 1] > crit) ++cell.rejections;
          }
          t.cells.push_back(cell);
        }
      }
      const double crit = decision_critical_value(TestName::LB, D, alpha, config.iota);
      RejectionCell cell{TestName::LB, config.n, D, 0, alpha, 0, 0};
      for (const auto& r : records) {
        if (r.failed) continue;
        ++cell.valid;
        if (r.LB[D - 1] > crit) ++cell.rejections;
      }
      t.cells.push_back(cell);
    }
  return t;
}

// ---------------------------------------------------------------------------
// Runner with checkpointing

namespace {

nlohmann::json record_to_json(const ReplicationRecord& r) {
  nlohmann::json j;
  j["rep"] = r.index;
  j["failed"] = r.failed;
  if (r.failed) j["failure"] = r.failure;
  j["P"] = r.P;
  j["F"] = r.F;
  j["LB"] = r.LB;
  j["params"] = r.params;
  return j;
}

ReplicationRecord record_from_json(const nlohmann::json& j) {
  ReplicationRecord r;
  r.index = j.at("rep").get<std::size_t>();
  r.failed = j.at("failed").get<bool>();
  if (r.failed) r.failure = j.value("failure", std::string{});
  r.P = j.at("P").get<std::vector<double>>();
  r.F = j.at("F").get<std::vector<double>>();
  r.LB = j.at("LB").get<std::vector<double>>();
  r.params = j.at("params").get<std::vector<double>>();
  return r;
}

std::string fingerprint(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  copy.checkpoint.clear();
  copy.jobs = 0;
  copy.resume = false;
  copy.alpha_set.clear();  // decisions are recomputed from stored statistics
  return to_config_text(copy);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::optional<ReplicationRecord>> slots(config.reps);
  const std::string print = fingerprint(config);

  std::ofstream checkpoint;
  if (!config.checkpoint.empty()) {
    std::size_t line_no = 0;
    if (config.resume) {
      std::ifstream in(config.checkpoint);
      std::string line;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
          // A partially written trailing line from an interrupted run is dropped.
          continue;
        }
        if (j.contains("config")) {
          if (j["config"].get<std::string>() != print)
            throw DataError("checkpoint " + config.checkpoint + " was written for a different configuration");
          continue;
        }
        try {
          auto rec = record_from_json(j);
          if (rec.index < slots.size()) slots[rec.index] = std::move(rec);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(line_no, std::string("checkpoint record: ") + e.what());
        }
      }
      checkpoint.open(config.checkpoint, std::ios::app);
      if (line_no == 0) checkpoint << nlohmann::json{{"config", print}}.dump() << "\n";
    } else {
      checkpoint.open(config.checkpoint, std::ios::trunc);
      checkpoint << nlohmann::json{{"config", print}}.dump() << "\n";
    }
    if (!checkpoint) throw DataError("cannot open checkpoint file " + config.checkpoint);
    checkpoint.flush();
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!slots[i]) todo.push_back(i);

  // Warm the reference laws needed for decisions before workers start.
  for (std::size_t D : config.D_set)
    for (double a : config.alpha_set) (void)decision_critical_value(TestName::F, D, a, config.iota);

  unsigned workers = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(todo.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto work = [&] {
    try {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= todo.size()) return;
        auto rec = run_replication(config, todo[i]);
        if (checkpoint.is_open()) {
          const std::string line = record_to_json(rec).dump();
          std::lock_guard lock(io);
          checkpoint << line << "\n";
          checkpoint.flush();
        }
        slots[todo[i]] = std::move(rec);
      }
    } catch (...) {
      std::lock_guard lock(io);
      if (!failure) failure = std::current_exception();
      next = todo.size();
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult out;
  out.records.reserve(slots.size());
  for (auto& s : slots) out.records.push_back(std::move(*s));
  out.table = aggregate(config, out.records);
  return out;
}

std::string describe_plan(const ExperimentConfig& config) {
  config.validate();
  std::ostringstream os;
  const auto ks = config.bandwidths();
  os << "design " << to_string(config.design) << ", n = " << config.n << " (+" << config.burn_in
     << " burn-in), " << config.reps << " replications, seed " << config.master_seed << "\n";
  os << "bandwidths k:";
  for (auto k : ks) os << " " << k;
  os << "\nhorizons D:";
  for (auto D : config.D_set) os << " " << D;
  os << "\nlevels alpha:";
  for (auto a : config.alpha_set) os << " " << a;
  os << "\niota " << config.iota << "; tests P, F per (D, k) and LB per D: "
     << config.D_set.size() * config.alpha_set.size() * (2 * ks.size() + 1) << " cells\n";
  if (!config.checkpoint.empty())
    os << "checkpoint " << config.checkpoint << (config.resume ? " (resume)" : "") << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

std::string g6(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string emit_figure_data(const RejectionTable& table, const ExperimentConfig& config, FigureKind kind,
                             std::optional<std::size_t> fixed) {
  std::ostringstream os;
  const auto ks = config.bandwidths();
  auto row = [&](TestName test, std::size_t axis, double alpha, const RejectionCell* cell) {
    os << to_string(test) << "," << config.n << "," << axis << "," << g6(alpha) << ",";
    if (cell && cell->valid > 0)
      os << g6(cell->frequency()) << "," << g6(cell->se()) << "\n";
    else
      os << "NA,NA\n";
  };
  if (kind == FigureKind::rejection_vs_k) {
    const std::size_t D = fixed.value_or(config.D_set.front());
    os << "#meta,default_k," << default_k(config.n).k << "\n";
    os << "test,n,k_or_D,alpha,frequency,se\n";
    for (double alpha : config.alpha_set)
      for (TestName test : {TestName::P, TestName::F, TestName::LB})
        for (std::size_t k : ks) row(test, k, alpha, table.find(test, D, test == TestName::LB ? 0 : k, alpha));
  } else {
    const std::size_t k = fixed.value_or(ks.front());
    os << "test,n,k_or_D,alpha,frequency,se\n";
    for (double alpha : config.alpha_set)
      for (TestName test : {TestName::P, TestName::F, TestName::LB})
        for (std::size_t D : config.D_set) row(test, D, alpha, table.find(test, D, test == TestName::LB ? 0 : k, alpha));
  }
  return os.str();
}

}  // namespace tailport
