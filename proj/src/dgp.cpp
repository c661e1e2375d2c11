#include "tailport/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>

#include "tailport/error.hpp"

namespace tailport {

// ---------------------------------------------------------------------------
// Parameter invariants

void AparchXParams::validate() const {
  if (!(omega > 0.0)) throw DomainError("APARCH-X: omega must be > 0");
  if (!(alpha_plus >= 0.0 && alpha_minus >= 0.0 && beta >= 0.0 && pi >= 0.0))
    throw DomainError("APARCH-X: alpha_plus, alpha_minus, beta and pi must be >= 0");
  if (!(beta < 1.0)) throw DomainError("APARCH-X: beta must be < 1");
  if (!(delta > 0.0)) throw DomainError("APARCH-X: delta must be > 0");
}

void GarchParams::validate() const {
  if (!(omega > 0.0)) throw DomainError("GARCH: omega must be > 0");
  if (!(alpha >= 0.0 && beta >= 0.0)) throw DomainError("GARCH: alpha and beta must be >= 0");
  if (!(alpha + beta < 1.0)) throw DomainError("GARCH: alpha + beta must be < 1");
}

bool has_unit_circle_root(const std::vector<double>& coefficients, double tol) {
  // Trailing zero coefficients do not contribute roots.
  std::size_t p = coefficients.size();
  while (p > 0 && coefficients[p - 1] == 0.0) --p;
  if (p == 0) return false;
  // Roots of 1 - sum c_j z^j are reciprocals of the companion eigenvalues.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) companion(0, static_cast<Eigen::Index>(j)) = coefficients[j];
  for (std::size_t j = 1; j < p; ++j) companion(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = 1.0;
  const Eigen::VectorXcd eig = companion.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    if (std::abs(std::abs(eig(i)) - 1.0) < tol) return true;
  return false;
}

void ArmaGarchParams::validate() const {
  if (has_unit_circle_root(phi)) throw DomainError("ARMA-GARCH: AR polynomial has a root on the unit circle");
  if (has_unit_circle_root(theta_ma)) throw DomainError("ARMA-GARCH: MA polynomial has a root on the unit circle");
  if (!(omega > 0.0)) throw DomainError("ARMA-GARCH: omega must be > 0");
  if (alpha.empty()) throw DomainError("ARMA-GARCH: at least one ARCH coefficient is required");
  double total = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw DomainError("ARMA-GARCH: ARCH coefficients must be >= 0");
    total += a;
  }
  for (double b : beta) {
    if (!(b >= 0.0)) throw DomainError("ARMA-GARCH: GARCH coefficients must be >= 0");
    total += b;
  }
  if (!(total < 1.0)) throw DomainError("ARMA-GARCH: sum of GARCH coefficients must be < 1");
}

void TvSkewTParams::validate() const {
  if (!(std::abs(c1) < 1.0) || !(std::abs(c2) < 1.0))
    throw DomainError("time-varying skewed-t: |c1| and |c2| must be < 1");
}

// ---------------------------------------------------------------------------
// Skewed-t

SkewedT::SkewedT(double lambda, double eta) : lambda_(lambda), eta_(eta) {
  if (!(lambda > -1.0 && lambda < 1.0)) throw DomainError("skewed-t: lambda must lie in (-1, 1)");
  if (!(eta > 2.0) || !std::isfinite(eta)) throw DomainError("skewed-t: eta must be > 2");
  c_ = std::exp(std::lgamma(0.5 * (eta + 1.0)) - std::lgamma(0.5 * eta)) / std::sqrt(M_PI * (eta - 2.0));
  a_ = 4.0 * lambda * c_ * (eta - 2.0) / (eta - 1.0);
  const double b2 = 1.0 + 3.0 * lambda * lambda - a_ * a_;
  if (!(b2 > 0.0)) throw DomainError("skewed-t: b^2 = 1 + 3 lambda^2 - a^2 must be > 0");
  b_ = std::sqrt(b2);
}

double SkewedT::density(double x) const {
  const double side = (x + a_ / b_) < 0.0 ? -1.0 : 1.0;
  const double z = (b_ * x + a_) / (1.0 + side * lambda_);
  return b_ * c_ * std::pow(1.0 + z * z / (eta_ - 2.0), -0.5 * (eta_ + 1.0));
}

namespace {

// CDF and quantile of the Student-t rescaled to unit variance.
double unit_t_cdf(double u, double eta) {
  boost::math::students_t_distribution<double> t(eta);
  return boost::math::cdf(t, u * std::sqrt(eta / (eta - 2.0)));
}

double unit_t_quantile(double p, double eta) {
  boost::math::students_t_distribution<double> t(eta);
  return boost::math::quantile(t, p) * std::sqrt((eta - 2.0) / eta);
}

double open_uniform(Engine& rng) {
  // (0, 1): 53 random bits, shifted by half a step
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

// Piecewise: on each side of the mode -a/b the law is an affine image of the unit-variance t.
double SkewedT::cdf(double x) const {
  if (x < -a_ / b_) return (1.0 - lambda_) * unit_t_cdf((b_ * x + a_) / (1.0 - lambda_), eta_);
  return 0.5 * (1.0 - lambda_) + (1.0 + lambda_) * (unit_t_cdf((b_ * x + a_) / (1.0 + lambda_), eta_) - 0.5);
}

double SkewedT::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("skewed-t quantile: u must lie in (0, 1)");
  const double split = 0.5 * (1.0 - lambda_);
  if (u < split) return ((1.0 - lambda_) * unit_t_quantile(u / (1.0 - lambda_), eta_) - a_) / b_;
  return ((1.0 + lambda_) * unit_t_quantile(0.5 + (u - split) / (1.0 + lambda_), eta_) - a_) / b_;
}

double logistic_map(double x, double L, double U) {
  if (!(L < U)) throw DomainError("logistic_map: L must be < U");
  return L + (U - L) / (1.0 + std::exp(-x));
}

// The logistic rounds to its bounds for |latent| beyond ~37; keep the result inside the open interval
// so the skewed-t parameters stay valid.
double tv_transform(double latent, double L, double U) {
  return std::clamp(logistic_map(-latent, L, U), std::nextafter(L, U), std::nextafter(U, L));
}

double skewed_t_density(double x, const SkewedT& p) { return p.density(x); }

double draw_skewed_t(Engine& rng, const SkewedT& p) { return p.quantile(open_uniform(rng)); }

double draw_std_student_t(Engine& rng, double nu) {
  if (!(nu > 2.0)) throw DomainError("standardized Student-t: nu must be > 2");
  boost::random::student_t_distribution<double> t(nu);
  return t(rng) * std::sqrt((nu - 2.0) / nu);
}

double draw_std_normal(Engine& rng) {
  boost::random::normal_distribution<double> normal;
  return normal(rng);
}

double draw_innovation(Engine& rng, const Innovation& innovation) {
  return std::visit(
      [&rng](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, NormalInnovation>) {
          return draw_std_normal(rng);
        } else if constexpr (std::is_same_v<T, StudentTInnovation>) {
          return draw_std_student_t(rng, law.nu);
        } else {
          return draw_skewed_t(rng, SkewedT(law.lambda, law.eta));
        }
      },
      innovation);
}

// ---------------------------------------------------------------------------
// Processes

std::vector<double> simulate_covariate(Engine& rng, std::size_t n_total) {
  if (n_total == 0) throw DomainError("simulate_covariate: n_total must be >= 1");
  constexpr double phi = 0.9;
  double z = draw_std_normal(rng) / std::sqrt(1.0 - phi * phi);
  for (std::size_t s = 0; s < kWarmup; ++s) z = phi * z + draw_std_normal(rng);
  std::vector<double> x(n_total);
  for (std::size_t t = 0; t < n_total; ++t) {
    z = phi * z + draw_std_normal(rng);
    x[t] = std::exp(z);
  }
  return x;
}

AparchXPath simulate_aparch_x(Engine& rng, const AparchXParams& p, std::size_t n, std::size_t v,
                              const Innovation& innovation) {
  p.validate();
  if (n == 0) throw DomainError("simulate_aparch_x: n must be >= 1");
  const std::size_t emitted = n + v;
  const std::size_t steps = kWarmup + emitted;
  // cov[s] is the covariate entering step s (x_{s-1}); cov[s + 1] is x_s.
  const std::vector<double> cov = simulate_covariate(rng, steps + 1);

  AparchXPath path;
  path.returns.reserve(emitted);
  path.sigma.reserve(emitted);
  path.covariate.reserve(emitted);

  double y_prev = 0.0;
  double sd_prev = p.omega / (1.0 - p.beta);  // sigma^delta
  for (std::size_t s = 0; s < steps; ++s) {
    const double pos = std::max(y_prev, 0.0);
    const double neg = std::max(-y_prev, 0.0);
    const double sd = p.omega + p.alpha_plus * std::pow(pos, p.delta) + p.alpha_minus * std::pow(neg, p.delta) +
                      p.beta * sd_prev + p.pi * cov[s];
    const double sigma = p.delta == 1.0 ? sd : std::pow(sd, 1.0 / p.delta);
    const double y = sigma * draw_innovation(rng, innovation);
    if (s >= kWarmup) {
      path.returns.push_back(y);
      path.sigma.push_back(sigma);
      path.covariate.push_back(cov[s + 1]);
    }
    y_prev = y;
    sd_prev = sd;
  }
  return path;
}

GarchTvPath simulate_garch_tvskewt(Engine& rng, const GarchParams& g, const TvSkewTParams& tv, std::size_t n) {
  g.validate();
  tv.validate();
  if (n == 0) throw DomainError("simulate_garch_tvskewt: n must be >= 1");
  GarchTvPath path;
  path.returns.reserve(n);
  path.sigma.reserve(n);
  path.eta.reserve(n);
  path.lambda.reserve(n);

  double y_prev = 0.0;
  double s2_prev = g.omega / (1.0 - g.alpha - g.beta);
  double eta_latent = tv.a1 / (1.0 - tv.c1);
  double lambda_latent = tv.a2 / (1.0 - tv.c2);
  for (std::size_t s = 0; s < kWarmup + n; ++s) {
    eta_latent = tv.a1 + tv.b1 * y_prev + tv.c1 * eta_latent;
    lambda_latent = tv.a2 + tv.b2 * y_prev + tv.c2 * lambda_latent;
    const double eta = tv_transform(eta_latent, 2.0, 30.0);
    const double lambda = tv_transform(lambda_latent, -1.0, 1.0);
    const double s2 = g.omega + g.alpha * y_prev * y_prev + g.beta * s2_prev;
    const double sigma = std::sqrt(s2);
    const double y = sigma * draw_skewed_t(rng, SkewedT(lambda, eta));
    if (s >= kWarmup) {
      path.returns.push_back(y);
      path.sigma.push_back(sigma);
      path.eta.push_back(eta);
      path.lambda.push_back(lambda);
    }
    y_prev = y;
    s2_prev = s2;
  }
  return path;
}

namespace {

// GARCH(p, q) errors over kWarmup + n steps, started at the unconditional variance.
GarchPath garch_steps(Engine& rng, const ArmaGarchParams& p, std::size_t steps, const Innovation& innovation) {
  const double persistence = std::accumulate(p.alpha.begin(), p.alpha.end(), 0.0) +
                             std::accumulate(p.beta.begin(), p.beta.end(), 0.0);
  const double unconditional = p.omega / (1.0 - persistence);
  const std::size_t pa = p.alpha.size();
  const std::size_t qb = p.beta.size();
  // Histories, most recent first.
  std::vector<double> x2(pa, unconditional);
  std::vector<double> s2(std::max<std::size_t>(qb, 1), unconditional);

  GarchPath out;
  out.errors.resize(steps);
  out.sigma.resize(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    double var = p.omega;
    for (std::size_t j = 0; j < pa; ++j) var += p.alpha[j] * x2[j];
    for (std::size_t j = 0; j < qb; ++j) var += p.beta[j] * s2[j];
    const double sigma = std::sqrt(var);
    const double x = sigma * draw_innovation(rng, innovation);
    out.errors[s] = x;
    out.sigma[s] = sigma;
    if (pa > 0) {
      std::rotate(x2.rbegin(), x2.rbegin() + 1, x2.rend());
      x2[0] = x * x;
    }
    std::rotate(s2.rbegin(), s2.rbegin() + 1, s2.rend());
    s2[0] = var;
  }
  return out;
}

void drop_warmup(std::vector<double>& v) { v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(kWarmup)); }

}  // namespace

GarchPath simulate_garch(Engine& rng, const ArmaGarchParams& p, std::size_t n, const Innovation& innovation) {
  p.validate();
  if (n == 0) throw DomainError("simulate_garch: n must be >= 1");
  GarchPath path = garch_steps(rng, p, kWarmup + n, innovation);
  drop_warmup(path.errors);
  drop_warmup(path.sigma);
  path.returns = path.errors;
  return path;
}

GarchPath simulate_arma_garch(Engine& rng, const ArmaGarchParams& p, std::size_t n, const Innovation& innovation) {
  p.validate();
  if (n == 0) throw DomainError("simulate_arma_garch: n must be >= 1");
  const std::size_t steps = kWarmup + n;
  GarchPath path = garch_steps(rng, p, steps, innovation);
  path.returns.assign(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    double y = path.errors[t];
    for (std::size_t j = 1; j <= p.phi.size() && j <= t; ++j) y += p.phi[j - 1] * path.returns[t - j];
    for (std::size_t j = 1; j <= p.theta_ma.size() && j <= t; ++j) y -= p.theta_ma[j - 1] * path.errors[t - j];
    path.returns[t] = y;
  }
  drop_warmup(path.returns);
  drop_warmup(path.errors);
  drop_warmup(path.sigma);
  return path;
}

}  // namespace tailport
