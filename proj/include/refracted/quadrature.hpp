#pragma once

// Adaptive Gauss-Kronrod quadrature and geometric panel sums for improper
// integrals. Shared by every integral in the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <stop_token>
#include <vector>

#include "refracted/error.hpp"

namespace refracted {

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_intervals = 2000;
  std::stop_token stop;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

struct PanelOptions {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  int min_panels = 4;
  int max_panels = 200;
  // Magnitude of contributions computed elsewhere; the stopping rule is
  // relative to |reference + partial sum|.
  double reference = 0.0;
  std::stop_token stop;
};

inline void throw_if_stopped(const std::stop_token& stop) {
  if (stop.stop_requested()) throw Error(Errc::Cancelled, "quadrature cancelled");
}

namespace detail {

inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool refinable;
  bool operator<(const Segment& o) const { return error < o.error; }
};

// One 15-point Kronrod panel with the QUADPACK error heuristic. A segment
// whose error sits at the round-off floor is marked non-refinable.
template <class F>
Segment gk15(F& f, double a, double b) {
  const double centr = 0.5 * (a + b);
  const double hlgth = 0.5 * (b - a);
  const double fc = f(centr);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  double resabs = std::abs(resk);
  double fv1[7];
  double fv2[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = hlgth * kXgk[j];
    const double f1 = f(centr - dx);
    const double f2 = f(centr + dx);
    fv1[j] = f1;
    fv2[j] = f2;
    resk += kWgk[j] * (f1 + f2);
    resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  const double value = resk * hlgth;
  resabs *= std::abs(hlgth);
  resasc *= std::abs(hlgth);
  double err = std::abs((resk - resg) * hlgth);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double floor = 50.0 * eps * resabs;
  bool refinable = true;
  if (err <= floor) {
    err = floor;
    refinable = false;
  }
  if (std::abs(b - a) <= 64.0 * eps * std::max(std::abs(a), std::abs(b))) refinable = false;
  if (!std::isfinite(value)) throw Error(Errc::NonFinite, "non-finite integrand value");
  return {a, b, value, err, refinable};
}

}  // namespace detail

// Globally adaptive quadrature over the union of [points[i], points[i+1]].
template <class F>
QuadResult integrate(F&& f, std::span<const double> points, const QuadOptions& opts = {}) {
  std::priority_queue<detail::Segment> heap;
  double total = 0.0;
  double total_err = 0.0;
  double frozen_err = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i + 1] > points[i])) continue;
    detail::Segment s = detail::gk15(f, points[i], points[i + 1]);
    total += s.value;
    total_err += s.error;
    if (s.refinable)
      heap.push(s);
    else
      frozen_err += s.error;
  }
  int intervals = static_cast<int>(heap.size());
  auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
  while (total_err > target() && !heap.empty()) {
    throw_if_stopped(opts.stop);
    if (total_err - frozen_err <= 0.5 * target()) break;
    if (intervals >= opts.max_intervals)
      throw Error(Errc::TolNotMet, "adaptive quadrature exhausted its interval budget");
    detail::Segment s = heap.top();
    heap.pop();
    const double mid = 0.5 * (s.a + s.b);
    detail::Segment l = detail::gk15(f, s.a, mid);
    detail::Segment r = detail::gk15(f, mid, s.b);
    total += l.value + r.value - s.value;
    total_err += l.error + r.error - s.error;
    for (const auto& c : {l, r}) {
      if (c.refinable)
        heap.push(c);
      else
        frozen_err += c.error;
    }
    ++intervals;
  }
  return {total, total_err};
}

template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opts = {}) {
  const double pts[2] = {a, b};
  return integrate(f, std::span<const double>(pts, 2), opts);
}

// Sums panel(k), k = 0, 1, ..., whose magnitudes eventually decay
// geometrically. Once two consecutive geometric-tail predictions agree,
// the predicted remainder is added and the sum stops.
template <class P>
QuadResult panel_sum(P&& panel, const PanelOptions& opts) {
  double sum = 0.0;
  double err = 0.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  double prev_tail = std::numeric_limits<double>::quiet_NaN();
  int growing = 0;
  for (int k = 0; k < opts.max_panels; ++k) {
    throw_if_stopped(opts.stop);
    const QuadResult p = panel(k);
    sum += p.value;
    err += p.error;
    const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(sum + opts.reference));
    double tail = std::numeric_limits<double>::quiet_NaN();
    if (k >= 1 && prev != 0.0) {
      const double r = p.value / prev;
      if (r > 0.0 && r < 0.99) tail = p.value * r / (1.0 - r);
      growing = (r >= 1.0 && std::abs(p.value) > target) ? growing + 1 : 0;
    }
    if (k + 1 >= opts.min_panels) {
      if (p.value == 0.0 && prev == 0.0) return {sum, err};
      if (std::isfinite(tail) && std::isfinite(prev_tail)) {
        const double gap = std::abs(prev_tail - (p.value + tail));
        if (gap <= 0.25 * target && std::abs(tail) <= std::abs(sum + opts.reference) + target)
          return {sum + tail, err + gap};
      }
      if (std::abs(p.value) <= 1e-4 * target && std::abs(prev) <= 1e-4 * target)
        return {sum, err + std::abs(p.value)};
    }
    if (growing >= 12) throw Error(Errc::Divergent, "panel contributions do not decay");
    prev = p.value;
    prev_tail = tail;
  }
  throw Error(Errc::TolNotMet, "panel sum did not converge within its panel budget");
}

// Integral over (0, inf) split into dyadic panels p[2^k, 2^{k+1}] outward from
// the pivot p and p[2^{-k-1}, 2^{-k}] inward to 0, each family summed by
// panel_sum. Suits integrands with algebraic decay at infinity or an
// integrable singularity at 0; the pivot should sit where the integrand turns
// over. Panels far below the running total only need absolute accuracy.
template <class F>
QuadResult integrate_dyadic(F&& f, std::vector<double> breakpoints, const QuadOptions& opts = {},
                            int max_far = 90, int max_near = 160, double pivot = 1.0) {
  std::sort(breakpoints.begin(), breakpoints.end());
  std::vector<double> pts;
  double running = 0.0;
  QuadOptions qo = opts;
  auto panel_on = [&](double lo, double hi) {
    qo.abs_tol = std::max(opts.abs_tol, 0.1 * opts.rel_tol * std::abs(running));
    pts.clear();
    pts.push_back(lo);
    for (double b : breakpoints)
      if (b > lo && b < hi) pts.push_back(b);
    pts.push_back(hi);
    const QuadResult r = integrate(f, std::span<const double>(pts), qo);
    running += r.value;
    return r;
  };
  PanelOptions far;
  far.rel_tol = opts.rel_tol;
  far.abs_tol = opts.abs_tol;
  far.min_panels = 4;
  far.max_panels = max_far;
  far.stop = opts.stop;
  const QuadResult outer =
      panel_sum([&](int k) { return panel_on(pivot * std::ldexp(1.0, k), pivot * std::ldexp(1.0, k + 1)); }, far);
  PanelOptions near = far;
  near.min_panels = 6;
  near.max_panels = max_near;
  near.reference = outer.value;
  const QuadResult inner =
      panel_sum([&](int k) { return panel_on(pivot * std::ldexp(1.0, -k - 1), pivot * std::ldexp(1.0, -k)); }, near);
  return {outer.value + inner.value, outer.error + inner.error};
}

// Integral over [lo, hi] where either end may be infinite. Infinite ends are
// covered by panels of doubling width starting at the outermost finite point.
template <class F>
QuadResult integrate_line(F&& f, double lo, double hi, std::vector<double> breakpoints,
                          const QuadOptions& opts = {}, double scale = 1.0) {
  if (!(hi > lo)) return {};
  std::vector<double> pts;
  if (std::isfinite(lo)) pts.push_back(lo);
  for (double p : breakpoints)
    if (p > lo && p < hi && std::isfinite(p)) pts.push_back(p);
  if (std::isfinite(hi)) pts.push_back(hi);
  if (pts.empty()) pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  QuadResult core;
  if (pts.size() >= 2) core = integrate(f, std::span<const double>(pts), opts);
  QuadResult out = core;
  auto run_tail = [&](double anchor, double dir) {
    PanelOptions po;
    po.rel_tol = opts.rel_tol;
    po.abs_tol = opts.abs_tol;
    po.reference = out.value;
    po.stop = opts.stop;
    po.min_panels = 3;
    QuadOptions inner = opts;
    auto pan = [&](int k) {
      const double w0 = scale * (std::ldexp(1.0, k) - 1.0);
      const double w1 = scale * (std::ldexp(1.0, k + 1) - 1.0);
      const double a = anchor + dir * w0;
      const double b = anchor + dir * w1;
      return dir > 0 ? integrate(f, a, b, inner) : integrate(f, b, a, inner);
    };
    const QuadResult t = panel_sum(pan, po);
    out.value += t.value;
    out.error += t.error;
  };
  if (!std::isfinite(hi)) run_tail(pts.back(), 1.0);
  if (!std::isfinite(lo)) run_tail(pts.front(), -1.0);
  return out;
}

}  // namespace refracted
