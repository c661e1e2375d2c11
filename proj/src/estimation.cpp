#include "tailport/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include "tailport/error.hpp"

namespace tailport {

namespace {

constexpr double kMaxPersistence = 0.9999;
constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// |y|^delta with exact products for the common powers
double power(double v, double delta) {
  if (delta == 1.0) return v;
  if (delta == 2.0) return v * v;
  return std::pow(v, delta);
}

}  // namespace

// ---------------------------------------------------------------------------
// Filters

FilterOutput aparch_filter(std::span<const double> y, const AparchParams& p, double delta) {
  if (!(p.omega > 0.0)) throw DomainError("APARCH filter: omega must be > 0");
  if (!(delta > 0.0)) throw DomainError("APARCH filter: delta must be > 0");
  const std::size_t n = y.size();
  FilterOutput out;
  out.sigma.resize(n);
  out.mu.assign(n, 0.0);
  out.residuals.resize(n);
  double y_prev = 0.0;
  double sd_prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double pos = std::max(y_prev, 0.0);
    const double neg = std::max(-y_prev, 0.0);
    const double sd = p.omega + p.alpha_plus * power(pos, delta) + p.alpha_minus * power(neg, delta) +
                      p.beta * sd_prev;
    const double sigma = delta == 1.0 ? sd : delta == 2.0 ? std::sqrt(sd) : std::pow(sd, 1.0 / delta);
    out.sigma[t] = sigma;
    out.residuals[t] = y[t] / sigma;
    y_prev = y[t];
    sd_prev = sd;
  }
  return out;
}

FilterOutput arma_garch_filter(std::span<const double> y, const ArmaGarchParams& p) {
  if (!(p.omega > 0.0)) throw DomainError("ARMA-GARCH filter: omega must be > 0");
  const std::size_t n = y.size();
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    double v = y[t];
    for (std::size_t j = 1; j <= p.phi.size() && j <= t; ++j) v -= p.phi[j - 1] * y[t - j];
    for (std::size_t j = 1; j <= p.theta_ma.size() && j <= t; ++j) v += p.theta_ma[j - 1] * x[t - j];
    x[t] = v;
  }
  FilterOutput out;
  out.sigma.resize(n);
  out.mu.resize(n);
  out.residuals.resize(n);
  std::vector<double> s2(n);
  for (std::size_t t = 0; t < n; ++t) {
    double v = p.omega;
    for (std::size_t j = 1; j <= p.alpha.size() && j <= t; ++j) v += p.alpha[j - 1] * (x[t - j] * x[t - j]);
    for (std::size_t j = 1; j <= p.beta.size() && j <= t; ++j) v += p.beta[j - 1] * s2[t - j];
    s2[t] = v;
    out.sigma[t] = std::sqrt(v);
    out.mu[t] = y[t] - x[t];
    out.residuals[t] = x[t] / out.sigma[t];
  }
  return out;
}

FilterOutput garch_filter(std::span<const double> y, const GarchParams& p) {
  ArmaGarchParams ag;
  ag.omega = p.omega;
  ag.alpha = {p.alpha};
  ag.beta = {p.beta};
  return arma_garch_filter(y, ag);
}

// ---------------------------------------------------------------------------
// Model specification

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::aparch11: return "aparch11";
    case ModelKind::garch11: return "garch11";
    case ModelKind::arma_garch: return "arma-garch";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "aparch11") return ModelKind::aparch11;
  if (name == "garch11") return ModelKind::garch11;
  if (name == "arma-garch" || name == "arma_garch") return ModelKind::arma_garch;
  throw DomainError("unknown model '" + name + "' (expected aparch11, garch11 or arma-garch)");
}

namespace {

ArmaGarchOrders effective_orders(const ModelSpec& m) {
  return m.kind == ModelKind::garch11 ? ArmaGarchOrders{0, 0, 1, 1} : m.orders;
}

}  // namespace

void ModelSpec::validate() const {
  if (kind == ModelKind::aparch11 && !(delta > 0.0)) throw DomainError("APARCH: delta must be > 0");
  if (kind == ModelKind::arma_garch && orders.arch == 0)
    throw DomainError("ARMA-GARCH: at least one ARCH lag is required");
}

std::size_t ModelSpec::parameter_count() const {
  if (kind == ModelKind::aparch11) return 4;
  const auto o = effective_orders(*this);
  return o.ar + o.ma + 1 + o.arch + o.garch;
}

std::vector<std::string> ModelSpec::parameter_names() const {
  if (kind == ModelKind::aparch11) return {"omega", "alpha_plus", "alpha_minus", "beta"};
  if (kind == ModelKind::garch11) return {"omega", "alpha", "beta"};
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= orders.ar; ++j) names.push_back("phi" + std::to_string(j));
  for (std::size_t j = 1; j <= orders.ma; ++j) names.push_back("theta" + std::to_string(j));
  names.push_back("omega");
  for (std::size_t j = 1; j <= orders.arch; ++j) names.push_back("alpha" + std::to_string(j));
  for (std::size_t j = 1; j <= orders.garch; ++j) names.push_back("beta" + std::to_string(j));
  return names;
}

namespace {

ArmaGarchParams unpack_arma_garch(const ArmaGarchOrders& o, std::span<const double> params) {
  ArmaGarchParams p;
  std::size_t i = 0;
  p.phi.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(o.ar));
  i += o.ar;
  p.theta_ma.assign(params.begin() + static_cast<std::ptrdiff_t>(i),
                    params.begin() + static_cast<std::ptrdiff_t>(i + o.ma));
  i += o.ma;
  p.omega = params[i++];
  p.alpha.assign(params.begin() + static_cast<std::ptrdiff_t>(i),
                 params.begin() + static_cast<std::ptrdiff_t>(i + o.arch));
  i += o.arch;
  p.beta.assign(params.begin() + static_cast<std::ptrdiff_t>(i),
                params.begin() + static_cast<std::ptrdiff_t>(i + o.garch));
  return p;
}

void check_param_count(const ModelSpec& model, std::span<const double> params) {
  if (params.size() != model.parameter_count())
    throw DomainError("expected " + std::to_string(model.parameter_count()) + " parameters for " +
                      to_string(model.kind) + ", got " + std::to_string(params.size()));
}

}  // namespace

FilterOutput run_filter(std::span<const double> y, const ModelSpec& model, std::span<const double> params) {
  model.validate();
  check_param_count(model, params);
  if (model.kind == ModelKind::aparch11)
    return aparch_filter(y, {params[0], params[1], params[2], params[3]}, model.delta);
  return arma_garch_filter(y, unpack_arma_garch(effective_orders(model), params));
}

// ---------------------------------------------------------------------------
// Objective

namespace {

// Allocation-light evaluation of the QML criterion for repeated calls on one series.
class Criterion {
 public:
  // The first `skip` terms still drive the recursion but are left out of the average:
  // with zero initial values they mostly measure the start-up error.
  Criterion(std::span<const double> y, const ModelSpec& model, std::size_t skip)
      : y_(y), model_(model), skip_(skip) {
    if (model.kind == ModelKind::aparch11) {
      pos_.resize(y.size());
      neg_.resize(y.size());
      for (std::size_t t = 0; t < y.size(); ++t) {
        pos_[t] = power(std::max(y[t], 0.0), model.delta);
        neg_[t] = power(std::max(-y[t], 0.0), model.delta);
      }
    } else {
      x_.resize(y.size());
      s2_.resize(y.size());
    }
  }

  double operator()(std::span<const double> params) {
    for (double v : params)
      if (!std::isfinite(v)) return kInf;
    return model_.kind == ModelKind::aparch11 ? aparch(params) : arma_garch(params);
  }

 private:
  double aparch(std::span<const double> p) {
    const double omega = p[0], ap = p[1], am = p[2], beta = p[3];
    const double expo = 2.0 / model_.delta;
    double sd_prev = 0.0;
    double total = 0.0;
    for (std::size_t t = 0; t < y_.size(); ++t) {
      double sd = omega + beta * sd_prev;
      if (t > 0) sd += ap * pos_[t - 1] + am * neg_[t - 1];
      if (!(sd > 0.0) || !std::isfinite(sd)) return kInf;
      double s2;
      if (model_.delta == 1.0)
        s2 = sd * sd;
      else if (model_.delta == 2.0)
        s2 = sd;
      else
        s2 = std::pow(sd, expo);
      if (t >= skip_) total += y_[t] * y_[t] / s2 + std::log(s2);
      sd_prev = sd;
    }
    return total / static_cast<double>(y_.size() - skip_);
  }

  double arma_garch(std::span<const double> params) {
    const auto o = effective_orders(model_);
    const double* phi = params.data();
    const double* theta = phi + o.ar;
    const double omega = theta[o.ma];
    const double* alpha = theta + o.ma + 1;
    const double* beta = alpha + o.arch;
    double total = 0.0;
    for (std::size_t t = 0; t < y_.size(); ++t) {
      double v = y_[t];
      for (std::size_t j = 1; j <= o.ar && j <= t; ++j) v -= phi[j - 1] * y_[t - j];
      for (std::size_t j = 1; j <= o.ma && j <= t; ++j) v += theta[j - 1] * x_[t - j];
      x_[t] = v;
      double s2 = omega;
      for (std::size_t j = 1; j <= o.arch && j <= t; ++j) s2 += alpha[j - 1] * (x_[t - j] * x_[t - j]);
      for (std::size_t j = 1; j <= o.garch && j <= t; ++j) s2 += beta[j - 1] * s2_[t - j];
      if (!(s2 > 0.0) || !std::isfinite(s2) || !std::isfinite(v)) return kInf;
      s2_[t] = s2;
      if (t >= skip_) total += v * v / s2 + std::log(s2);
    }
    return total / static_cast<double>(y_.size() - skip_);
  }

  std::span<const double> y_;
  ModelSpec model_;
  std::size_t skip_;
  std::vector<double> pos_, neg_, x_, s2_;
};

void check_burn_in(std::span<const double> y, std::size_t burn_in) {
  if (burn_in + 2 > y.size()) throw DataError("QML: burn-in leaves fewer than 2 observations");
}

}  // namespace

double qml_objective(std::span<const double> y, const ModelSpec& model, std::span<const double> params,
                     std::size_t burn_in) {
  model.validate();
  check_param_count(model, params);
  check_burn_in(y, burn_in);
  Criterion f(y, model, burn_in);
  return f(params);
}

// ---------------------------------------------------------------------------
// Parameter transforms

std::vector<double> to_natural(const ModelSpec& model, std::span<const double> u) {
  check_param_count(model, u);
  if (model.kind == ModelKind::aparch11)
    return {std::exp(u[0]), std::exp(u[1]), std::exp(u[2]), kMaxPersistence * logistic(u[3])};

  const auto o = effective_orders(model);
  std::vector<double> p(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(o.ar + o.ma));
  std::size_t i = o.ar + o.ma;
  p.push_back(std::exp(u[i++]));
  const double persistence = kMaxPersistence * logistic(u[i++]);
  const std::size_t m = o.arch + o.garch;
  // Shares: softmax over m components, the last one pinned at 0 in log space.
  std::vector<double> w(m, 0.0);
  double wmax = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) wmax = std::max(wmax, u[i + j]);
  double denom = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    w[j] = std::exp((j + 1 < m ? u[i + j] : 0.0) - wmax);
    denom += w[j];
  }
  for (std::size_t j = 0; j < m; ++j) p.push_back(persistence * w[j] / denom);
  return p;
}

std::vector<double> to_search(const ModelSpec& model, std::span<const double> params) {
  check_param_count(model, params);
  constexpr double floor = 1e-10;
  if (model.kind == ModelKind::aparch11) {
    const double b = std::clamp(params[3] / kMaxPersistence, floor, 1.0 - 1e-12);
    return {std::log(std::max(params[0], floor)), std::log(std::max(params[1], floor)),
            std::log(std::max(params[2], floor)), logit(b)};
  }
  const auto o = effective_orders(model);
  std::vector<double> u(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(o.ar + o.ma));
  std::size_t i = o.ar + o.ma;
  u.push_back(std::log(std::max(params[i++], floor)));
  const std::size_t m = o.arch + o.garch;
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) total += std::max(params[i + j], floor);
  u.push_back(logit(std::clamp(total / kMaxPersistence, floor, 1.0 - 1e-12)));
  const double last = std::max(params[i + m - 1], floor);
  for (std::size_t j = 0; j + 1 < m; ++j) u.push_back(std::log(std::max(params[i + j], floor) / last));
  return u;
}

// ---------------------------------------------------------------------------
// Gradient

namespace {

bool is_nonnegative_component(const ModelSpec& model, std::size_t i) {
  if (model.kind == ModelKind::aparch11) return true;
  const auto o = effective_orders(model);
  return i >= o.ar + o.ma;
}

std::vector<double> fd_gradient(Criterion& f, const ModelSpec& model, std::span<const double> params) {
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    const double orig = theta[i];
    if (is_nonnegative_component(model, i) && orig - h <= 0.0) {
      const double f0 = f(theta);
      theta[i] = orig + h;
      const double f1 = f(theta);
      g[i] = (f1 - f0) / h;
    } else {
      theta[i] = orig + h;
      const double fp = f(theta);
      theta[i] = orig - h;
      const double fm = f(theta);
      g[i] = (fp - fm) / (2.0 * h);
    }
    theta[i] = orig;
  }
  return g;
}

// Removes gradient components that point out of the feasible region at an active bound.
void project_active_bounds(const ModelSpec& model, std::span<const double> params, std::vector<double>& g) {
  constexpr double near_zero = 1e-6;
  constexpr double near_cap = 1e-6;
  if (model.kind == ModelKind::aparch11) {
    for (std::size_t i = 1; i < 4; ++i)
      if (params[i] < near_zero && g[i] > 0.0) g[i] = 0.0;
    if (params[3] > kMaxPersistence - near_cap && g[3] < 0.0) g[3] = 0.0;
    return;
  }
  const auto o = effective_orders(model);
  const std::size_t first = o.ar + o.ma + 1;
  const std::size_t m = o.arch + o.garch;
  for (std::size_t j = 0; j < m; ++j)
    if (params[first + j] < near_zero && g[first + j] > 0.0) g[first + j] = 0.0;
  double total = 0.0, gsum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    total += params[first + j];
    gsum += g[first + j];
  }
  if (total > kMaxPersistence - near_cap && gsum < 0.0)
    for (std::size_t j = 0; j < m; ++j) g[first + j] -= gsum / static_cast<double>(m);
}

}  // namespace

std::vector<double> objective_gradient(std::span<const double> y, const ModelSpec& model,
                                       std::span<const double> params, std::size_t burn_in) {
  model.validate();
  check_param_count(model, params);
  check_burn_in(y, burn_in);
  Criterion f(y, model, burn_in);
  return fd_gradient(f, model, params);
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

struct SimplexResult {
  std::vector<double> u;
  double value = kInf;
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;
};

template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> start, double step, double tol, int max_iter,
                          bool record_trace) {
  const std::size_t m = start.size();
  std::vector<std::vector<double>> pts(m + 1, start);
  std::vector<double> vals(m + 1);
  for (std::size_t i = 0; i < m; ++i) pts[i + 1][i] += step;
  for (std::size_t i = 0; i <= m; ++i) vals[i] = f(pts[i]);

  SimplexResult res;
  std::vector<std::size_t> idx(m + 1);
  std::vector<double> centroid(m), trial(m), trial2(m);
  auto point_at = [&](double coef, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < m; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
  };

  for (int it = 0; it < max_iter; ++it) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = idx[0], worst = idx[m], second = idx[m - 1];
    if (record_trace) res.trace.push_back(vals[best]);
    res.iterations = it;
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= tol * (1.0 + std::abs(vals[best]))) {
      res.converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= m; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < m; ++j) centroid[j] += pts[i][j] / static_cast<double>(m);

    point_at(-1.0, trial, pts[worst]);
    const double fr = f(trial);
    if (fr < vals[best]) {
      point_at(-2.0, trial2, pts[worst]);
      const double fe = f(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    point_at(outside ? -0.5 : 0.5, trial2, pts[worst]);
    const double fc = f(trial2);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < m; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      vals[i] = f(pts[i]);
    }
  }
  const auto best_it = std::min_element(vals.begin(), vals.end());
  res.u = pts[static_cast<std::size_t>(best_it - vals.begin())];
  res.value = *best_it;
  return res;
}

// Damped Newton steps in search space with finite-difference derivatives. Only
// steps that lower the objective are taken.
template <class F>
void newton_polish(F&& f, std::vector<double>& u, double& value, std::vector<double>* trace) {
  const std::size_t m = u.size();
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(m));
    Eigen::MatrixXd H(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<double> w = u;
    std::vector<double> hs(m);
    for (std::size_t i = 0; i < m; ++i) hs[i] = 1e-4 * std::max(1.0, std::abs(u[i]));
    std::vector<double> fp(m), fm(m);
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = u[i] + hs[i];
      fp[i] = f(w);
      w[i] = u[i] - hs[i];
      fm[i] = f(w);
      w[i] = u[i];
      const auto ii = static_cast<Eigen::Index>(i);
      g(ii) = (fp[i] - fm[i]) / (2.0 * hs[i]);
      H(ii, ii) = (fp[i] - 2.0 * value + fm[i]) / (hs[i] * hs[i]);
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        w[i] = u[i] + hs[i];
        w[j] = u[j] + hs[j];
        const double fpp = f(w);
        w[j] = u[j] - hs[j];
        const double fpm = f(w);
        w[i] = u[i] - hs[i];
        const double fmm = f(w);
        w[j] = u[j] + hs[j];
        const double fmp = f(w);
        w[i] = u[i];
        w[j] = u[j];
        const double hij = (fpp - fpm - fmp + fmm) / (4.0 * hs[i] * hs[j]);
        H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hij;
        H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = hij;
      }
    if (!g.allFinite() || !H.allFinite()) return;
    if (g.lpNorm<Eigen::Infinity>() < 1e-11) return;

    bool improved = false;
    double mu = 0.0;
    const double scale = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::MatrixXd A = H;
      A.diagonal().array() += mu;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      const bool pd = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                      (ldlt.vectorD().array() > 0.0).all();
      if (pd) {
        Eigen::VectorXd step = -ldlt.solve(g);
        const double norm = step.norm();
        if (norm > 2.0) step *= 2.0 / norm;
        std::vector<double> cand(m);
        for (std::size_t i = 0; i < m; ++i) cand[i] = u[i] + step(static_cast<Eigen::Index>(i));
        const double fc = f(cand);
        if (fc < value) {
          u = cand;
          value = fc;
          if (trace) trace->push_back(value);
          improved = true;
          break;
        }
      }
      mu = mu == 0.0 ? 1e-6 * scale : mu * 10.0;
    }
    if (!improved) return;
  }
}

double sample_mean_power(std::span<const double> y, double power) {
  double s = 0.0;
  for (double v : y) s += std::pow(std::abs(v), power);
  return s / static_cast<double>(y.size());
}

std::vector<double> variance_targeting_start(std::span<const double> y, const ModelSpec& model) {
  constexpr double a0 = 0.1, b0 = 0.8;
  if (model.kind == ModelKind::aparch11) {
    const double level = sample_mean_power(y, model.delta);
    return {(1.0 - a0 - b0) * level, a0, a0, b0};
  }
  const auto o = effective_orders(model);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  std::vector<double> p(o.ar + o.ma, 0.0);
  const double arch_total = a0;
  const double garch_total = o.garch > 0 ? b0 : 0.0;
  p.push_back((1.0 - arch_total - garch_total) * var);
  for (std::size_t j = 0; j < o.arch; ++j) p.push_back(arch_total / static_cast<double>(o.arch));
  for (std::size_t j = 0; j < o.garch; ++j) p.push_back(garch_total / static_cast<double>(o.garch));
  return p;
}

}  // namespace

std::vector<double> FitResult::residuals() const {
  return {filter.residuals.begin() + static_cast<std::ptrdiff_t>(burn_in), filter.residuals.end()};
}

FitResult qml_fit(std::span<const double> y, const ModelSpec& model, const FitOptions& options) {
  model.validate();
  if (y.size() < 50) throw DataError("QML fit needs at least 50 observations");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError("QML fit: series contains NaN or infinite values");
  check_burn_in(y, options.burn_in);
  if (options.restarts < 1) throw DomainError("QML fit: restarts must be >= 1");

  Criterion criterion(y, model, options.burn_in);
  auto objective_u = [&](const std::vector<double>& u) {
    const auto theta = to_natural(model, u);
    return criterion(theta);
  };

  const std::vector<double> start = to_search(model, variance_targeting_start(y, model));
  Engine rng(options.seed);
  boost::random::normal_distribution<double> normal(0.0, 0.3);

  SimplexResult best;
  bool any_converged = false;
  int iterations = 0;
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<double> u0 = start;
    if (r > 0)
      for (double& v : u0) v += normal(rng);
    SimplexResult run =
        nelder_mead(objective_u, u0, 0.5, options.tolerance, options.max_iterations, options.record_trace);
    iterations += run.iterations;
    any_converged = any_converged || run.converged;
    if (run.value < best.value) best = std::move(run);
  }
  if (!std::isfinite(best.value))
    throw FitFailed("QML fit: objective is not finite at any iterate", to_natural(model, best.u.empty() ? start : best.u),
                    best.value);

  std::vector<double> u = best.u;
  double value = best.value;
  std::vector<double> trace = std::move(best.trace);
  newton_polish(objective_u, u, value, options.record_trace ? &trace : nullptr);

  std::vector<double> params = to_natural(model, u);
  std::vector<double> gradient = fd_gradient(criterion, model, params);
  project_active_bounds(model, params, gradient);
  double gmax = 0.0;
  for (double g : gradient) gmax = std::max(gmax, std::abs(g));
  const bool converged = any_converged && gmax < options.gradient_tolerance;

  if (!converged && options.throw_on_failure)
    throw FitFailed("QML fit did not converge after " + std::to_string(options.restarts) +
                        " restarts (max projected gradient " + std::to_string(gmax) + ")",
                    params, value);

  FilterOutput filter = run_filter(y, model, params);
  std::vector<double> tail(filter.residuals.begin() + static_cast<std::ptrdiff_t>(options.burn_in),
                           filter.residuals.end());
  for (double e : tail)
    if (!std::isfinite(e)) throw InternalError("QML fit: non-finite standardized residual");
  const double n = static_cast<double>(y.size() - options.burn_in);
  return FitResult{
      .model = model,
      .params = std::move(params),
      .objective = value,
      .loglik = -0.5 * n * (std::log(2.0 * M_PI) + value),
      .converged = converged,
      .iterations = iterations,
      .gradient = std::move(gradient),
      .observations = std::vector<double>(y.begin(), y.end()),
      .filter = std::move(filter),
      .burn_in = options.burn_in,
      .residuals_after_burnin = ResidualSample::from_residuals(tail),
      .trace = std::move(trace),
  };
}

ResidualSample standardized_residuals(const FitResult& fit) {
  if (!fit.converged) throw DomainError("standardized_residuals: fit did not converge");
  for (std::size_t t = fit.burn_in; t < fit.filter.sigma.size(); ++t)
    if (!(fit.filter.sigma[t] > 0.0)) throw InternalError("standardized_residuals: zero fitted volatility");
  return fit.residuals_after_burnin;
}

}  // namespace tailport
