#include "refracted/refracted_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "refracted/error.hpp"
#include "refracted/quadrature.hpp"

namespace refracted {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << what << " must be finite";
    throw Error(Errc::Domain, msg.str());
  }
}

// Points |u| * 10^k below `limit`, where a density of v + |u| turns over.
std::vector<double> graded_points(double scale, double limit) {
  std::vector<double> pts;
  for (double p = scale; p < limit && pts.size() < 24; p *= 10.0) pts.push_back(p);
  return pts;
}

// int_0^inf e^{-Phi v} pi(v + s) dv for s > 0: the K-kernel density of the
// undershoot at u = -s.
double k_density(const ScaleEvaluator& ev, double s, double inner_rel_tol, const std::stop_token& stop) {
  const LevySpec& spec = ev.spec();
  const double phi = ev.phi();
  if (spec.family == Family::CppHyperexp)
    return (spec.lambda * spec.mu * (-spec.mu * s).exp() / (spec.mu + phi)).sum();
  QuadOptions qo;
  qo.rel_tol = inner_rel_tol;
  qo.stop = stop;
  auto integrand = [&](double v) { return std::exp(-phi * v) * levy_density(spec, v + s); };
  const double scale = phi > 0.0 ? std::max(s, std::min(1.0, 1.0 / phi)) : s;
  return integrate_line(integrand, 0.0, kInf, graded_points(s, kInf), qo, scale).value;
}

// int_0^inf r_(x, v) pi(v + s) dv with r_(x, v) = e^{-Phi v} W(x) - W(x - v):
// the Gerber-Shiu density of the undershoot at u = -s from x > 0.
double gs_density(const ScaleEvaluator& ev, double x, double s, double inner_rel_tol, const std::stop_token& stop) {
  const LevySpec& spec = ev.spec();
  const BarrierMode killed = BarrierMode::lower(0.0);
  QuadOptions qo;
  qo.rel_tol = inner_rel_tol;
  qo.stop = stop;
  // Round-off in r_ is relative to its terms, spread over mass Pi-bar(s).
  qo.abs_tol = 100.0 * std::numeric_limits<double>::epsilon() * density_term_scale(ev, x) * levy_tail_mass(spec, s);
  auto near = [&](double v) { return potential_density_levy(ev, killed, x, v) * levy_density(spec, v + s); };
  std::vector<double> pts = {0.0};
  for (double p : graded_points(s, x)) pts.push_back(p);
  pts.push_back(x);
  const double inside = integrate(near, std::span<const double>(pts), qo).value;
  // Beyond v = x only e^{-Phi v} W(x) survives; shift v by x.
  const double wx_decayed = ev.has_leading_term()
                                ? ev.phi_prime() + ev.w_excess(x) * std::exp(-ev.phi() * x)
                                : ev.w(x) * std::exp(-ev.phi() * x);
  return inside + wx_decayed * k_density(ev, s + x, inner_rel_tol, stop);
}

std::vector<double> negated_positive(const std::vector<double>& u_breakpoints) {
  std::vector<double> out;
  for (double u : u_breakpoints)
    if (u < 0.0) out.push_back(-u);
  return out;
}

}  // namespace

RefractedSpec::RefractedSpec(LevySpec x, LevySpec y) : x_(std::move(x)), y_(std::move(y)) {
  // Neither supported family carries a Gaussian part.
  cert_.x_no_gaussian_ok = true;
  cert_.convergence_ok = phi(y_, 0.0) > 0.0 || std::isfinite(first_moment_beyond_one(x_));
}

void RefractedSpec::require_valid() const {
  if (!cert_.x_no_gaussian_ok) throw Error(Errc::CertInvalid, "X_NO_GAUSSIAN_OK does not hold");
  if (!cert_.convergence_ok) throw Error(Errc::CertInvalid, "CONVERGENCE_OK does not hold");
}

RefractedModel::RefractedModel(RefractedSpec rs, double q, AnalyticsOptions opts)
    : rs_(std::move(rs)), q_(q), opts_(std::move(opts)), x_(rs_.x(), q), y_(rs_.y(), q) {
  rs_.require_valid();
  phi_x0_ = phi(rs_.x(), 0.0);
  phi_y0_ = phi(rs_.y(), 0.0);
  mean_part_ = std::max(psi_prime(rs_.x(), 0.0), 0.0);
}

KernelIntegralResult RefractedModel::w_u(double x, double y) const {
  require_finite(x, "x");
  require_finite(y, "y");
  if (y > 0.0 || y > x) throw Error(Errc::Domain, "w_u requires y <= min(x, 0)");
  if (x <= 0.0) return {y_.w(x - y), 0.0};
  return w_u_positive_branch(x, y);
}

KernelIntegralResult RefractedModel::w_u_positive_branch(double x, double y) const {
  if (!(x >= 0.0) || y > 0.0) throw Error(Errc::Domain, "positive branch needs x >= 0 >= y");
  // W_Y(u - y) concentrates mass at u = 0- as y -> 0-, which the formula
  // evaluated at y = 0 loses when Y has unbounded variation.
  if (y == 0.0 && !rs_.y().bounded_variation())
    throw Error(Errc::Domain, "y = 0 needs a bounded-variation Y when x > 0");
  const double wx = x_.w(x);
  const double wy = y_.w(-y);
  const double p0 = phi_x0_;
  KernelOptions ko;
  ko.rel_tol = opts_.rel_tol;
  ko.stop = opts_.stop;
  ko.v_breakpoints = {x};
  ko.term_scale = wx * wy;
  if (y < 0.0) ko.u_breakpoints = {y};
  const auto r = tilde_pi_integrate(
      rs_.x(), [&](double u, double v) { return wx * wy * std::exp(-p0 * v) - y_.w(u - y) * x_.w(x - v); }, ko);
  return {wx * wy * mean_part_ + r.value, r.error};
}

KernelIntegralResult RefractedModel::w_u_bar(double x) const {
  require_finite(x, "x");
  if (x <= 0.0) return {std::exp(y_.phi() * x), 0.0};
  const double wx = x_.w(x);
  const double p0 = phi_x0_;
  const double py = y_.phi();
  KernelOptions ko;
  ko.rel_tol = opts_.rel_tol;
  ko.stop = opts_.stop;
  ko.v_breakpoints = {x};
  ko.term_scale = wx;
  const auto r = tilde_pi_integrate(
      rs_.x(), [&](double u, double v) { return wx * std::exp(-p0 * v) - x_.w(x - v) * std::exp(py * u); }, ko);
  return {wx * mean_part_ + r.value, r.error};
}

double RefractedModel::exit_up(double b, double x, double a) const {
  if (!(b < 0.0 && a > 0.0)) throw Error(Errc::Domain, "exit_up needs b < 0 < a");
  if (x < b || x > a) throw Error(Errc::Domain, "exit_up needs b <= x <= a");
  if (x == a) return 1.0;
  return w_u(x, b).value / w_u(a, b).value;
}

double RefractedModel::exit_up_one_sided(double x, double a) const {
  if (x > a) throw Error(Errc::Domain, "exit_up_one_sided needs x <= a");
  if (x == a) return 1.0;
  return w_u_bar(x).value / w_u_bar(a).value;
}

double RefractedModel::killed_potential_density(double b, double a, double x, double y) const {
  if (!(y >= b && y <= a) || y == 0.0) throw Error(Errc::Domain, "density needs y in [b, a] minus {0}");
  const double ratio = exit_up(b, x, a);
  if (y > 0.0) return clamp_density(ratio * x_.w(a - y) - x_.w(x - y));
  const double second = y > x ? 0.0 : w_u(x, y).value;
  return clamp_density(ratio * w_u(a, y).value - second);
}

KernelIntegralResult RefractedModel::normalization_constant() const {
  if (!(q_ > 0.0)) throw Error(Errc::Domain, "normalization constant needs q > 0");
  const double p0 = phi_x0_;
  const double px = x_.phi();
  const double py = y_.phi();
  KernelOptions ko;
  ko.rel_tol = opts_.rel_tol;
  ko.stop = opts_.stop;
  const auto r = tilde_pi_integrate(
      rs_.x(), [&](double u, double v) { return -std::exp(-p0 * v) * std::expm1(py * u - (px - p0) * v); }, ko);
  return {mean_part_ + r.value, r.error};
}

LineFunction LineFunction::constant(double c) {
  LineFunction lf;
  lf.f = [c](double) { return c; };
  return lf;
}

LineFunction LineFunction::indicator(double lo, double hi) {
  if (!(lo < hi)) throw Error(Errc::Domain, "indicator needs lo < hi");
  LineFunction lf;
  lf.f = [lo, hi](double y) { return y > lo && y <= hi ? 1.0 : 0.0; };
  lf.lo = lo;
  lf.hi = hi;
  if (std::isfinite(lo)) lf.breakpoints.push_back(lo);
  if (std::isfinite(hi)) lf.breakpoints.push_back(hi);
  return lf;
}

IntegralResult k_kernel_by_undershoot(const ScaleEvaluator& ev, const std::function<double(double)>& g,
                                      std::vector<double> u_breakpoints, double rel_tol, double inner_rel_tol,
                                      std::stop_token stop) {
  QuadOptions qo;
  qo.rel_tol = rel_tol;
  qo.stop = stop;
  auto integrand = [&](double s) {
    // The density underflows far out; skip g there, it may be expensive.
    const double d = k_density(ev, s, inner_rel_tol, stop);
    return d == 0.0 ? 0.0 : g(-s) * d;
  };
  const QuadResult r = integrate_dyadic(integrand, negated_positive(u_breakpoints), qo);
  return {r.value, r.error};
}

IntegralResult gerber_shiu_by_undershoot(const ScaleEvaluator& ev, double x, const std::function<double(double)>& g,
                                         std::vector<double> u_breakpoints, double rel_tol, double inner_rel_tol,
                                         std::stop_token stop) {
  if (!(x > 0.0)) throw Error(Errc::Domain, "Gerber-Shiu integral requires x > 0");
  QuadOptions qo;
  qo.rel_tol = rel_tol;
  qo.stop = stop;
  auto integrand = [&](double s) {
    // The density underflows far out; skip g there, it may be expensive.
    const double d = gs_density(ev, x, s, inner_rel_tol, stop);
    return d == 0.0 ? 0.0 : g(-s) * d;
  };
  // The density turns over at undershoots of order x.
  const QuadResult r = integrate_dyadic(integrand, negated_positive(u_breakpoints), qo, 90, 160, std::min(x, 1.0));
  return {r.value, r.error};
}

Resolvent::Resolvent(const RefractedModel& model, LineFunction f) : model_(&model), f_(std::move(f)) {
  if (!(model.q() > 0.0)) throw Error(Errc::Domain, "resolvent needs q > 0");
  if (!f_.f) throw Error(Errc::Domain, "resolvent needs a test function");
  n_f_ = compute_n(f_);
  n_one_ = compute_n(LineFunction::constant(1.0));
  at_zero_ = n_f_.value / (model.q() * n_one_.value);
}

double Resolvent::killed_y_of(const LineFunction& g, double u) const {
  const double lo = g.lo;
  const double hi = std::min(g.hi, 0.0);
  if (!(hi > lo)) return 0.0;
  const ScaleEvaluator& ev = model_->y_eval();
  const BarrierMode upper = BarrierMode::upper(0.0);
  QuadOptions qo;
  qo.rel_tol = model_->options().inner_rel_tol;
  qo.stop = model_->options().stop;
  // Near u the density is a difference of O(1) terms; don't chase its round-off.
  qo.abs_tol = 100.0 * std::numeric_limits<double>::epsilon() * density_term_scale(ev, 0.0);
  std::vector<double> bps = g.breakpoints;
  bps.push_back(u);
  auto integrand = [&](double y) {
    const double gv = g.f(y);
    return gv == 0.0 ? 0.0 : gv * potential_density_levy(ev, upper, u, y);
  };
  return integrate_line(integrand, lo, hi, bps, qo).value;
}

double Resolvent::killed_y(double u) const {
  if (!(u < 0.0)) throw Error(Errc::Domain, "killed_y needs u < 0");
  return killed_y_of(f_, u);
}

double Resolvent::killed_x(double x) const {
  if (!(x > 0.0)) throw Error(Errc::Domain, "killed_x needs x > 0");
  const double lo = std::max(f_.lo, 0.0);
  const double hi = f_.hi;
  if (!(hi > lo)) return 0.0;
  const ScaleEvaluator& ev = model_->x_eval();
  const BarrierMode lower = BarrierMode::lower(0.0);
  QuadOptions qo;
  qo.rel_tol = model_->options().inner_rel_tol;
  qo.stop = model_->options().stop;
  qo.abs_tol = 100.0 * std::numeric_limits<double>::epsilon() * density_term_scale(ev, x) / ev.phi();
  std::vector<double> bps = f_.breakpoints;
  bps.push_back(x);
  auto integrand = [&](double y) {
    const double gv = f_.f(y);
    return gv == 0.0 ? 0.0 : gv * potential_density_levy(ev, lower, x, y);
  };
  return integrate_line(integrand, lo, hi, bps, qo, 1.0 / ev.phi()).value;
}

KernelIntegralResult Resolvent::compute_n(const LineFunction& g) const {
  const ScaleEvaluator& ex = model_->x_eval();
  const AnalyticsOptions& opts = model_->options();
  const double px = ex.phi();
  KernelIntegralResult out;
  const double lo = std::max(g.lo, 0.0);
  if (g.hi > lo) {
    QuadOptions qo;
    qo.rel_tol = opts.inner_rel_tol;
    qo.stop = opts.stop;
    auto weighted = [&](double y) {
      const double w = std::exp(-px * y);
      return w == 0.0 ? 0.0 : w * g.f(y);
    };
    const QuadResult pos = integrate_line(weighted, lo, g.hi,
                                          g.breakpoints, qo, 1.0 / px);
    out.value += pos.value;
    out.error += pos.error;
  }
  if (g.lo < 0.0) {
    const auto neg = k_kernel_by_undershoot(ex, [&](double u) { return killed_y_of(g, u); }, g.breakpoints,
                                            opts.nested_rel_tol, opts.inner_rel_tol, opts.stop);
    out.value += neg.value;
    out.error += neg.error;
  }
  return out;
}

double Resolvent::operator()(double x) const {
  require_finite(x, "x");
  if (x == 0.0) return at_zero_;
  const double py = model_->y_eval().phi();
  if (x < 0.0) return killed_y(x) + std::exp(py * x) * at_zero_;
  const AnalyticsOptions& opts = model_->options();
  const auto jump = gerber_shiu_by_undershoot(
      model_->x_eval(), x, [&](double u) { return killed_y_of(f_, u) + std::exp(py * u) * at_zero_; },
      f_.breakpoints, opts.nested_rel_tol, opts.inner_rel_tol, opts.stop);
  return killed_x(x) + jump.value;
}

double w_u(const RefractedSpec& rs, double q, double x, double y) { return RefractedModel(rs, q).w_u(x, y).value; }

double w_u_bar(const RefractedSpec& rs, double q, double x) { return RefractedModel(rs, q).w_u_bar(x).value; }

double exit_up(const RefractedSpec& rs, double q, double b, double x, double a) {
  return RefractedModel(rs, q).exit_up(b, x, a);
}

double exit_up_one_sided(const RefractedSpec& rs, double q, double x, double a) {
  return RefractedModel(rs, q).exit_up_one_sided(x, a);
}

double killed_potential_density(const RefractedSpec& rs, double q, double b, double a, double x, double y) {
  return RefractedModel(rs, q).killed_potential_density(b, a, x, y);
}

double resolvent(const RefractedSpec& rs, double q, double x, const LineFunction& f, double tol) {
  AnalyticsOptions opts;
  opts.nested_rel_tol = tol;
  const RefractedModel model(rs, q, opts);
  return Resolvent(model, f)(x);
}

double normalization_constant(const RefractedSpec& rs, double q) {
  return RefractedModel(rs, q).normalization_constant().value;
}

namespace {

LevySpec drift_shifted(const LevySpec& x_spec, double alpha) {
  if (!x_spec.bounded_variation()) throw Error(Errc::InvalidSpec, "drift refraction oracle needs bounded variation");
  if (!(alpha > 0.0)) throw Error(Errc::Domain, "refraction drift must be positive");
  return LevySpec::cpp(x_spec.delta + alpha, x_spec.lambda, x_spec.mu);
}

}  // namespace

KlOracle::KlOracle(const LevySpec& x_spec, double alpha, double q, double rel_tol)
    : alpha_(alpha), rel_tol_(rel_tol), x_(x_spec, q), y_(drift_shifted(x_spec, alpha), q) {}

double KlOracle::w_u(double x, double y) const {
  if (y > 0.0) throw Error(Errc::Domain, "kl_w_u needs y <= 0");
  const double base = y_.w(x - y);
  if (x <= 0.0) return base;
  QuadOptions qo;
  qo.rel_tol = rel_tol_;
  const double conv = integrate([&](double z) { return x_.w(x - z) * y_.w_prime(z - y); }, 0.0, x, qo).value;
  return base + alpha_ * conv;
}

double KlOracle::exit_up(double b, double x, double a) const {
  if (x == a) return 1.0;
  return w_u(x, b) / w_u(a, b);
}

double KlOracle::killed_potential_density(double b, double a, double x, double y) const {
  const double ratio = exit_up(b, x, a);
  if (y > 0.0) return clamp_density(ratio * x_.w(a - y) - x_.w(x - y));
  return clamp_density(ratio * w_u(a, y) - w_u(x, y));
}

double KlOracle::resolvent(double x, const LineFunction& f, double half_width) const {
  const double b = -half_width;
  const double a = half_width;
  const double ratio = exit_up(b, x, a);
  QuadOptions qo;
  qo.rel_tol = 1e-10;
  auto density = [&](double y) {
    if (y > 0.0) return ratio * x_.w(a - y) - x_.w(x - y);
    return ratio * w_u(a, y) - w_u(x, y);
  };
  auto integrand = [&](double y) {
    const double fv = f.f(y);
    return fv == 0.0 ? 0.0 : fv * density(y);
  };
  std::vector<double> pts = {b, 0.0, a};
  if (x > b && x < a && x != 0.0) pts.push_back(x);
  for (double p : f.breakpoints)
    if (p > b && p < a) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return integrate(integrand, std::span<const double>(pts), qo).value;
}

double kl_w_u(const LevySpec& x_spec, double alpha, double q, double x, double y) {
  return KlOracle(x_spec, alpha, q).w_u(x, y);
}

double kl_killed_potential_density(const LevySpec& x_spec, double alpha, double q, double b, double a, double x,
                                   double y) {
  return KlOracle(x_spec, alpha, q).killed_potential_density(b, a, x, y);
}

}  // namespace refracted
