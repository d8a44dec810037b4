#include "refracted/levy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "refracted/error.hpp"
#include "refracted/quadrature.hpp"

namespace refracted {

namespace {

double stable_constant_closed_form(double alpha) {
  return alpha * (alpha - 1.0) / std::tgamma(2.0 - alpha);
}

// 1 - e^{-x}(1+x), accurate for small x.
double one_minus_exp_times_linear(double x) { return -std::expm1(-x) - x * std::exp(-x); }

// e^th - 1 - th - th^2/2 without cancellation near 0.
double expm1_minus_quadratic(double th) {
  if (std::abs(th) > 0.1) return std::expm1(th) - th - 0.5 * th * th;
  double term = th * th * th / 6.0;
  double sum = term;
  for (int k = 4; k < 15; ++k) {
    term *= th / k;
    sum += term;
  }
  return sum;
}

}  // namespace

LevySpec LevySpec::cpp(double delta, Eigen::ArrayXd lambda, Eigen::ArrayXd mu) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(Errc::InvalidSpec, "compound Poisson drift must be positive and finite");
  if (lambda.size() == 0 || lambda.size() != mu.size())
    throw Error(Errc::InvalidSpec, "lambda and mu must be nonempty and of equal length");
  if (!(lambda > 0.0).all() || !(mu > 0.0).all() || !lambda.isFinite().all() || !mu.isFinite().all())
    throw Error(Errc::InvalidSpec, "lambda and mu entries must be positive and finite");
  LevySpec s;
  s.family = Family::CppHyperexp;
  s.delta = delta;
  s.lambda = std::move(lambda);
  s.mu = std::move(mu);
  return s;
}

LevySpec LevySpec::stable(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw Error(Errc::InvalidSpec, "stable index must lie in (1,2)");
  LevySpec s;
  s.family = Family::Stable;
  s.alpha = alpha;
  s.c_alpha = 1.0;
  // Solve Psi(1) = 1 for the density constant, then check the closed form.
  // The power-law pieces (theta^2/2 below |theta| = 1, -1 - theta above) are
  // integrated in closed form; their panel sums converge too slowly when
  // alpha is near 2 or near 1.
  JumpIntegralOptions opts;
  opts.rel_tol = 1e-11;
  opts.breakpoints = {1.0};
  auto g = [](double theta) { return theta >= -1.0 ? expm1_minus_quadratic(theta) : std::exp(theta); };
  const double unit =
      jump_integral(s, g, opts).value + 0.5 / (2.0 - alpha) + 1.0 / (alpha - 1.0) - 1.0 / alpha;
  const double numeric = 1.0 / unit;
  const double closed = stable_constant_closed_form(alpha);
  if (std::abs(numeric - closed) > 1e-8 * closed) {
    std::ostringstream msg;
    msg << "stable density constant mismatch: numeric " << numeric << " vs closed form " << closed;
    throw Error(Errc::InvalidSpec, msg.str());
  }
  s.c_alpha = closed;
  return s;
}

double psi(const LevySpec& spec, double theta) {
  if (!(theta >= 0.0)) throw Error(Errc::Domain, "psi requires theta >= 0");
  return laplace_exponent(spec, theta);
}

double psi_prime(const LevySpec& spec, double theta) {
  if (!(theta >= 0.0)) throw Error(Errc::Domain, "psi_prime requires theta >= 0");
  if (spec.family == Family::Stable) {
    if (theta == 0.0) return 0.0;
    return spec.alpha * std::pow(theta, spec.alpha - 1.0);
  }
  const Eigen::ArrayXd d = spec.mu + theta;
  return spec.delta - (spec.lambda * spec.mu / (d * d)).sum();
}

double phi(const LevySpec& spec, double q) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw Error(Errc::Domain, "phi requires finite q >= 0");
  const double slope0 = psi_prime(spec, 0.0);
  double lo = 0.0;
  if (q == 0.0) {
    if (slope0 >= 0.0) return 0.0;
    lo = 1e-8;
    if (!(psi(spec, lo) < 0.0)) throw Error(Errc::NoConvergence, "sign check near 0 failed");
  } else if (slope0 < 0.0) {
    lo = phi(spec, 0.0);
  }
  double hi = std::max(lo, 1.0);
  while (!(psi(spec, hi) > q)) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw Error(Errc::NoConvergence, "could not bracket phi");
  }
  const double tol = 1e-12 * std::max(1.0, q);
  // Bisection until the bracket is narrow, then safeguarded Newton.
  for (int i = 0; i < 200 && hi - lo > 1e-3 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (psi(spec, mid) > q ? hi : lo) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    const double f = psi(spec, x) - q;
    if (std::abs(f) <= 0.25 * tol) return x;
    (f > 0.0 ? hi : lo) = x;
    const double d = psi_prime(spec, x);
    double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      if (std::abs(psi(spec, next) - q) <= tol) return next;
      break;
    }
    x = next;
  }
  if (std::abs(psi(spec, x) - q) <= tol) return x;
  throw Error(Errc::NoConvergence, "phi root finder failed");
}

double gamma_drift(const LevySpec& spec) {
  if (spec.family == Family::Stable) return spec.c_alpha / (spec.alpha - 1.0);
  double removed = 0.0;
  for (Eigen::Index i = 0; i < spec.mu.size(); ++i)
    removed += spec.lambda[i] / spec.mu[i] * one_minus_exp_times_linear(spec.mu[i]);
  return spec.delta - removed;
}

double levy_density(const LevySpec& spec, double t) {
  if (spec.family == Family::Stable) return spec.c_alpha * std::pow(t, -1.0 - spec.alpha);
  return (spec.lambda * spec.mu * (-spec.mu * t).exp()).sum();
}

double levy_tail_mass(const LevySpec& spec, double t) {
  if (spec.family == Family::Stable) return spec.c_alpha * std::pow(t, -spec.alpha) / spec.alpha;
  return (spec.lambda * (-spec.mu * t).exp()).sum();
}

double first_moment_beyond_one(const LevySpec& spec) {
  if (spec.family == Family::Stable) return spec.c_alpha / (spec.alpha - 1.0);
  return (spec.lambda * (-spec.mu).exp() * (1.0 + 1.0 / spec.mu)).sum();
}

TruncatedSpec truncate(const LevySpec& spec, int n) {
  if (n < 1) throw Error(Errc::Domain, "truncation level must be >= 1");
  TruncatedSpec ts;
  ts.source = spec;
  ts.n = n;
  const double eps = 1.0 / n;
  if (spec.family == Family::Stable) {
    ts.drift = spec.c_alpha / (spec.alpha - 1.0) * std::pow(static_cast<double>(n), spec.alpha - 1.0);
    ts.rate = spec.c_alpha * std::pow(static_cast<double>(n), spec.alpha) / spec.alpha;
  } else {
    double removed = 0.0;
    for (Eigen::Index i = 0; i < spec.mu.size(); ++i)
      removed += spec.lambda[i] / spec.mu[i] * one_minus_exp_times_linear(spec.mu[i] * eps);
    ts.drift = spec.delta - removed;
    const Eigen::ArrayXd w = spec.lambda * (-spec.mu * eps).exp();
    ts.rate = w.sum();
    ts.cumulative.resize(w.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) ts.cumulative[i] = (acc += w[i]) / ts.rate;
    ts.cumulative[w.size() - 1] = 1.0;
  }
  if (!(ts.drift > 0.0)) {
    std::ostringstream msg;
    msg << "truncated drift " << ts.drift << " at level n=" << n << " is not positive";
    throw Error(Errc::NegativeDrift, msg.str());
  }
  if (!std::isfinite(ts.rate)) throw Error(Errc::NonFinite, "truncated jump rate is not finite");
  return ts;
}

double truncated_psi(const TruncatedSpec& ts, double theta, double tol) {
  const double cut = 1.0 / ts.n;
  JumpIntegralOptions opts;
  opts.rel_tol = tol;
  opts.breakpoints = {cut};
  const double jumps = jump_integral(
      ts.source,
      [&](double y) { return y < -cut ? -std::expm1(theta * y) : 0.0; }, opts).value;
  return ts.drift * theta - jumps;
}

IntegralResult jump_integral(const LevySpec& spec, const std::function<double(double)>& g,
                             const JumpIntegralOptions& opts) {
  auto integrand = [&](double t) {
    const double gv = g(-t);
    return gv == 0.0 ? 0.0 : gv * levy_density(spec, t);
  };
  QuadOptions qo;
  qo.rel_tol = opts.rel_tol;
  qo.abs_tol = opts.abs_tol;
  qo.stop = opts.stop;
  const QuadResult r = integrate_dyadic(integrand, opts.breakpoints, qo);
  return {r.value, r.error};
}

double jump_integral(const LevySpec& spec, const std::function<double(double)>& g, double tol) {
  JumpIntegralOptions opts;
  opts.rel_tol = tol;
  return jump_integral(spec, g, opts).value;
}

}  // namespace refracted
