#include "refracted/scale_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "refracted/error.hpp"
#include "refracted/mittag_leffler.hpp"
#include "refracted/quadrature.hpp"

namespace refracted {

namespace {

// Bisection on an open interval whose endpoint signs are known from the
// pole structure; the endpoints themselves are never evaluated.
template <class F>
double bisect_open(F&& f, double lo, double hi, bool negative_at_lo) {
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return mid;
    const double v = f(mid);
    if (v == 0.0) return mid;
    if ((v < 0.0) == negative_at_lo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double cpp_psi_prime_any(const LevySpec& s, double theta) {
  const Eigen::ArrayXd d = s.mu + theta;
  return s.delta - (s.lambda * s.mu / (d * d)).sum();
}

// z^2 E-remainder(alpha, alpha, z) as a function of t = z_min / z on (0, 1].
// It tends to a constant as z grows and is smooth in t away from alpha = 2.
constexpr double kExcessTableZMin = 10.0;
constexpr int kExcessTableNodes = 64;

double scaled_remainder(double alpha, double t) {
  const double z = kExcessTableZMin / t;
  return z * z * mittag_leffler_remainder(alpha, alpha, z);
}

double chebyshev_sum(const Eigen::ArrayXd& c, double t) {
  const double x = 2.0 * t - 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  for (Eigen::Index j = c.size() - 1; j >= 1; --j) {
    const double b0 = 2.0 * x * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + 0.5 * c[0];
}

// Chebyshev coefficients of scaled_remainder, or an empty array when the
// interpolant misses 1e-12 relative accuracy at the midpoints between nodes
// (alpha near 2, where the remainder oscillates in z).
Eigen::ArrayXd build_excess_table(double alpha) {
  const int n = kExcessTableNodes;
  Eigen::ArrayXd values(n);
  for (int k = 0; k < n; ++k) values[k] = scaled_remainder(alpha, 0.5 * (std::cos(M_PI * (k + 0.5) / n) + 1.0));
  Eigen::ArrayXd c(n);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += values[k] * std::cos(M_PI * j * (k + 0.5) / n);
    c[j] = 2.0 * acc / n;
  }
  for (int k = 0; k + 1 < n; k += 4) {
    const double t = 0.5 * (std::cos(M_PI * (k + 1.0) / n) + 1.0);
    const double exact = scaled_remainder(alpha, t);
    if (!(std::abs(chebyshev_sum(c, t) - exact) <= 1e-12 * std::abs(exact))) return {};
  }
  return c;
}

}  // namespace

ScaleEvaluator::ScaleEvaluator(LevySpec spec, double q) : spec_(std::move(spec)), q_(q) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw Error(Errc::Domain, "scale function requires finite q >= 0");
  if (spec_.family == Family::Stable) {
    mittag_leffler_crossover_check(spec_.alpha, spec_.alpha);
    mittag_leffler_crossover_check(spec_.alpha, spec_.alpha - 1.0);
    phi_ = refracted::phi(spec_, q_);
    const double slope = psi_prime(spec_, phi_);
    phi_prime_ = slope > 0.0 ? 1.0 / slope : std::numeric_limits<double>::infinity();
    leading_ = slope > 0.0 ? 1.0 / slope : 0.0;
    if (q_ > 0.0) {
      series_w_ = MittagLefflerSeries(spec_.alpha, spec_.alpha);
      series_w_prime_ = MittagLefflerSeries(spec_.alpha, spec_.alpha - 1.0);
    }
    if (leading_ > 0.0) excess_table_ = build_excess_table(spec_.alpha);
    return;
  }
  build_cpp_roots();
}

void ScaleEvaluator::build_cpp_roots() {
  // Merge components with equal rates; the exponent is unchanged.
  std::vector<std::pair<double, double>> comps;
  for (Eigen::Index i = 0; i < spec_.mu.size(); ++i) comps.emplace_back(spec_.mu[i], spec_.lambda[i]);
  std::sort(comps.begin(), comps.end());
  std::vector<double> mus;
  std::vector<double> lams;
  for (const auto& [m, l] : comps) {
    if (!mus.empty() && mus.back() == m)
      lams.back() += l;
    else {
      mus.push_back(m);
      lams.push_back(l);
    }
  }
  const std::size_t m = mus.size();

  for (int attempt = 0; attempt < 2; ++attempt) {
    const double q = q_;
    phi_ = refracted::phi(spec_, q);
    std::vector<double> r;
    auto psi_minus_q = [&](double th) { return laplace_exponent(spec_, th) - q; };
    auto slope_ratio = [&](double th) {
      double acc = spec_.delta;
      for (std::size_t i = 0; i < m; ++i) acc -= lams[i] / (mus[i] + th);
      return acc;
    };
    if (q == 0.0) {
      // Nonzero roots of Psi are the roots of Psi(theta)/theta, which is
      // increasing between consecutive poles.
      r.push_back(0.0);
      double hi = 1.0;
      while (!(slope_ratio(hi) > 0.0)) hi *= 2.0;
      const double r0 = bisect_open(slope_ratio, -mus[0], hi, true);
      r.push_back(r0 > 0.0 ? phi_ : r0);
      for (std::size_t k = 0; k + 1 < m; ++k) r.push_back(bisect_open(slope_ratio, -mus[k + 1], -mus[k], true));
    } else {
      r.push_back(phi_);
      r.push_back(bisect_open(psi_minus_q, -mus[0], 0.0, false));
      for (std::size_t k = 0; k + 1 < m; ++k) r.push_back(bisect_open(psi_minus_q, -mus[k + 1], -mus[k], false));
    }
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    bool degenerate = false;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
      if (sorted[i + 1] - sorted[i] < 1e-8 * std::max(1.0, std::abs(sorted[i + 1]))) degenerate = true;
    if (degenerate) {
      if (attempt == 1) throw Error(Errc::RepeatedRoot, "roots of Psi(theta) = q remain degenerate");
      q_ += 1e-10;
      q_perturbed_ = true;
      continue;
    }
    roots_ = Eigen::Map<const Eigen::ArrayXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    residues_.resize(roots_.size());
    for (Eigen::Index j = 0; j < roots_.size(); ++j) residues_[j] = 1.0 / cpp_psi_prime_any(spec_, roots_[j]);
    roots_.maxCoeff(&lead_index_);
    const double slope = cpp_psi_prime_any(spec_, phi_);
    phi_prime_ = slope > 0.0 ? 1.0 / slope : std::numeric_limits<double>::infinity();
    leading_ = slope > 0.0 ? residues_[lead_index_] : 0.0;
    return;
  }
}

double ScaleEvaluator::w(double x) const {
  if (x < 0.0) return 0.0;
  if (spec_.family == Family::Stable) {
    if (x == 0.0) return 0.0;
    const double a = spec_.alpha;
    const double xa1 = std::pow(x, a - 1.0);
    if (q_ == 0.0) return xa1 * reciprocal_gamma(a);
    const double z = q_ * xa1 * x;
    if (z <= kMittagLefflerCrossover) return xa1 * series_w_(z);
    if (excess_table_.size() > 0)
      return leading_ * std::exp(phi_ * x) + xa1 * chebyshev_sum(excess_table_, kExcessTableZMin / z) / (z * z);
    return xa1 * mittag_leffler(a, a, z);
  }
  if (x == 0.0) return 1.0 / spec_.delta;
  return (residues_ * (roots_ * x).exp()).sum();
}

double ScaleEvaluator::w_prime(double x) const {
  if (x < 0.0) return 0.0;
  if (spec_.family == Family::Stable) {
    if (x == 0.0) return std::numeric_limits<double>::infinity();
    const double a = spec_.alpha;
    const double xa2 = std::pow(x, a - 2.0);
    if (q_ == 0.0) return xa2 * reciprocal_gamma(a - 1.0);
    const double z = q_ * xa2 * x * x;
    if (z <= kMittagLefflerCrossover) return xa2 * series_w_prime_(z);
    return xa2 * mittag_leffler(a, a - 1.0, z);
  }
  return (residues_ * roots_ * (roots_ * x).exp()).sum();
}

double ScaleEvaluator::w_excess(double x) const {
  if (x < 0.0) throw Error(Errc::Domain, "w_excess requires x >= 0");
  if (leading_ == 0.0) return w(x);
  if (spec_.family == Family::Stable) {
    if (x == 0.0) return -leading_;
    const double a = spec_.alpha;
    const double xa1 = std::pow(x, a - 1.0);
    const double z = q_ * xa1 * x;
    // Below z = 10 the direct difference loses under two digits and avoids a quadrature.
    if (z <= kExcessTableZMin) return xa1 * series_w_(z) - leading_ * std::exp(phi_ * x);
    if (excess_table_.size() > 0) return xa1 * chebyshev_sum(excess_table_, kExcessTableZMin / z) / (z * z);
    return xa1 * mittag_leffler_remainder(a, a, z);
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < roots_.size(); ++j)
    if (j != lead_index_) acc += residues_[j] * std::exp(roots_[j] * x);
  if (x == 0.0) return 1.0 / spec_.delta - leading_;
  return acc;
}

double scale_w(const ScaleEvaluator& ev, double x) { return ev.w(x); }

double scale_w_prime(const ScaleEvaluator& ev, double x) {
  if (!(x > 0.0)) throw Error(Errc::Domain, "scale_w_prime requires x > 0");
  return ev.w_prime(x);
}

BarrierMode BarrierMode::lower(double b) {
  if (!std::isfinite(b)) throw Error(Errc::Domain, "lower barrier must be finite");
  BarrierMode m;
  m.kind = Kind::Lower;
  m.b = b;
  return m;
}

BarrierMode BarrierMode::upper(double a) {
  if (!std::isfinite(a)) throw Error(Errc::Domain, "upper barrier must be finite");
  BarrierMode m;
  m.kind = Kind::Upper;
  m.a = a;
  return m;
}

BarrierMode BarrierMode::both(double b, double a) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(b < a)) throw Error(Errc::Domain, "barriers need b < a");
  BarrierMode m;
  m.kind = Kind::Both;
  m.b = b;
  m.a = a;
  return m;
}

double clamp_density(double value) {
  if (value >= 0.0) return value;
  if (value >= -1e-12) return 0.0;
  std::ostringstream msg;
  msg << "density evaluated to " << value;
  throw Error(Errc::NonFinite, msg.str());
}

double exit_levy(const ScaleEvaluator& ev, const BarrierMode& mode, double x) {
  switch (mode.kind) {
    case BarrierMode::Kind::Both:
      if (x < mode.b || x > mode.a) throw Error(Errc::Domain, "exit_levy requires b <= x <= a");
      if (x == mode.a) return 1.0;
      return ev.w(x - mode.b) / ev.w(mode.a - mode.b);
    case BarrierMode::Kind::Upper:
      if (x > mode.a) throw Error(Errc::Domain, "exit_levy requires x <= a");
      return std::exp(-ev.phi() * (mode.a - x));
    default:
      throw Error(Errc::UnsupportedMode, "exit_levy supports Both and Upper modes only");
  }
}

double density_term_scale(const ScaleEvaluator& ev, double x) {
  if (!ev.has_leading_term()) return ev.w(x);
  return std::abs(ev.w_excess(x)) + std::abs(ev.w_excess(0.0)) + ev.phi_prime();
}

double potential_density_levy(const ScaleEvaluator& ev, const BarrierMode& mode, double x, double y) {
  const double phi = ev.phi();
  const bool lead = ev.has_leading_term();
  switch (mode.kind) {
    case BarrierMode::Kind::None: {
      if (!(ev.q() > 0.0)) throw Error(Errc::Domain, "whole-line potential density needs q > 0");
      if (y > x) return clamp_density(ev.phi_prime() * std::exp(-phi * (y - x)));
      return clamp_density(-ev.w_excess(x - y));
    }
    case BarrierMode::Kind::Lower: {
      if (x < mode.b) throw Error(Errc::Domain, "x below the lower barrier");
      if (y < mode.b) return 0.0;
      const double decay = std::exp(-phi * (y - mode.b));
      // Split off the leading exponential so far-away y cannot form 0 * inf.
      if (y > x && lead)
        return clamp_density(decay * ev.w_excess(x - mode.b) + ev.phi_prime() * std::exp(-phi * (y - x)));
      if (y > x) return clamp_density(decay * ev.w(x - mode.b));
      if (lead) return clamp_density(decay * ev.w_excess(x - mode.b) - ev.w_excess(x - y));
      return clamp_density(decay * ev.w(x - mode.b) - ev.w(x - y));
    }
    case BarrierMode::Kind::Upper: {
      if (x > mode.a) throw Error(Errc::Domain, "x above the upper barrier");
      if (y > mode.a) return 0.0;
      const double decay = std::exp(-phi * (mode.a - x));
      if (y > x && lead)
        return clamp_density(decay * ev.w_excess(mode.a - y) + ev.phi_prime() * std::exp(-phi * (y - x)));
      if (y > x) return clamp_density(decay * ev.w(mode.a - y));
      if (lead) return clamp_density(decay * ev.w_excess(mode.a - y) - ev.w_excess(x - y));
      return clamp_density(decay * ev.w(mode.a - y) - ev.w(x - y));
    }
    case BarrierMode::Kind::Both: {
      if (x < mode.b || x > mode.a) throw Error(Errc::Domain, "x outside [b, a]");
      if (y <= mode.b || y > mode.a) return 0.0;
      return clamp_density(ev.w(x - mode.b) * ev.w(mode.a - y) / ev.w(mode.a - mode.b) - ev.w(x - y));
    }
  }
  throw Error(Errc::UnsupportedMode, "unknown barrier mode");
}

IntegralResult tilde_pi_integrate(const LevySpec& spec, const KernelFunction& h, const KernelOptions& opts) {
  QuadOptions qo;
  qo.rel_tol = opts.inner_rel_tol;
  qo.stop = opts.stop;
  std::vector<double> pts;
  auto inner = [&](double t) {
    const double upper = std::min(t, opts.v_max);
    if (!(upper > 0.0)) return 0.0;
    pts.clear();
    pts.push_back(0.0);
    for (double vb : opts.v_breakpoints)
      if (vb > 0.0 && vb < upper) pts.push_back(vb);
    for (double ub : opts.u_breakpoints) {
      const double v = t + ub;
      if (v > 0.0 && v < upper) pts.push_back(v);
    }
    pts.push_back(upper);
    std::sort(pts.begin(), pts.end());
    QuadOptions local = qo;
    local.abs_tol = 100.0 * std::numeric_limits<double>::epsilon() * opts.term_scale * upper;
    return integrate([&](double v) { return h(v - t, v); }, std::span<const double>(pts), local).value;
  };

  JumpIntegralOptions jo;
  jo.rel_tol = opts.rel_tol;
  jo.abs_tol = opts.abs_tol;
  jo.stop = opts.stop;
  for (double vb : opts.v_breakpoints)
    if (vb > 0.0) jo.breakpoints.push_back(vb);
  for (double ub : opts.u_breakpoints) {
    if (ub < 0.0) jo.breakpoints.push_back(-ub);
    for (double vb : opts.v_breakpoints)
      if (vb > 0.0 && ub < 0.0) jo.breakpoints.push_back(vb - ub);
  }
  if (std::isfinite(opts.v_max)) jo.breakpoints.push_back(opts.v_max);
  return jump_integral(spec, [&](double theta) { return inner(-theta); }, jo);
}

IntegralResult gerber_shiu_integrate(const ScaleEvaluator& ev, const BarrierMode& mode, double x,
                                     const KernelFunction& f, const KernelOptions& opts) {
  if (!(x > 0.0)) throw Error(Errc::Domain, "Gerber-Shiu integral requires x > 0");
  KernelOptions ko = opts;
  ko.v_breakpoints.push_back(x);
  const double wx = ev.w(x);
  if (mode.kind == BarrierMode::Kind::None) {
    // e^{-Phi v} W(x) - W(x - v) is the density of Z killed below 0, which
    // has a cancellation-free form.
    const BarrierMode killed = BarrierMode::lower(0.0);
    if (ko.term_scale == 0.0) ko.term_scale = density_term_scale(ev, x);
    return tilde_pi_integrate(
        ev.spec(), [&](double u, double v) { return potential_density_levy(ev, killed, x, v) * f(u, v); }, ko);
  }
  if (ko.term_scale == 0.0) ko.term_scale = wx;
  if (mode.kind == BarrierMode::Kind::Upper) {
    const double a = mode.a;
    if (!(x < a)) throw Error(Errc::Domain, "Gerber-Shiu integral requires x < a");
    const double wa = ev.w(a);
    ko.v_breakpoints.push_back(a);
    ko.v_max = std::min(ko.v_max, a);
    return tilde_pi_integrate(
        ev.spec(), [&](double u, double v) { return (wx * ev.w(a - v) / wa - ev.w(x - v)) * f(u, v); }, ko);
  }
  throw Error(Errc::UnsupportedMode, "Gerber-Shiu integral supports None and Upper modes only");
}

IntegralResult excursion_kernel_integrate(const ScaleEvaluator& ev, ExcursionKernel variant, double a,
                                          const KernelFunction& f, const KernelOptions& opts) {
  KernelOptions ko = opts;
  if (variant == ExcursionKernel::K) {
    const double phi = ev.phi();
    return tilde_pi_integrate(ev.spec(), [&](double u, double v) { return std::exp(-phi * v) * f(u, v); }, ko);
  }
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(Errc::Domain, "KBar kernel needs a finite a > 0");
  const double wa = ev.w(a);
  ko.v_breakpoints.push_back(a);
  ko.v_max = std::min(ko.v_max, a);
  return tilde_pi_integrate(ev.spec(), [&](double u, double v) { return ev.w(a - v) / wa * f(u, v); }, ko);
}

}  // namespace refracted
