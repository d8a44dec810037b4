#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "refracted/error.hpp"
#include "refracted/refracted_analytics.hpp"

using namespace refracted;

namespace {

LevySpec cpp(double delta, double lambda, double mu) {
  return LevySpec::cpp(delta, Eigen::ArrayXd::Constant(1, lambda), Eigen::ArrayXd::Constant(1, mu));
}

// The two reference pairs: bounded variation on both sides, and a stable
// positive-side motion refracted into a compound Poisson one.
RefractedSpec cpp_pair() { return {cpp(2.0, 1.0, 1.0), cpp(1.2, 1.0, 2.0)}; }
RefractedSpec stable_pair() { return {LevySpec::stable(1.5), cpp(1.2, 1.0, 2.0)}; }

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// R^{(q)} f at 0 where f is itself a resolvent at another rate. Only the
// positive half-line of g is costly; below 0 it is an exponential times g(0).
double resolvent_of_resolvent_at_zero(const RefractedModel& outer, const Resolvent& inner) {
  LineFunction g;
  g.f = [&](double y) { return inner(y); };
  g.breakpoints = {0.0};
  return Resolvent(outer, g).at_zero();
}

}  // namespace

TEST_CASE("negative branch of W_U is the scale function of Y") {
  for (const auto& rs : {cpp_pair(), stable_pair()})
    for (double q : {0.0, 1.0}) {
      const RefractedModel m(rs, q);
      CHECK(m.w_u(-0.5, -1.0).value == m.y_eval().w(0.5));
      for (double x : {-2.0, -1.0, -0.3, 0.0})
        for (double y : {-3.0, -2.0, -1.0})
          if (y <= x) CHECK(m.w_u(x, y).value == m.y_eval().w(x - y));
    }
  CHECK_THROWS_AS(w_u(cpp_pair(), 0.0, 1.0, 0.5), Error);
  CHECK_THROWS_AS(w_u(cpp_pair(), 0.0, -1.0, -0.5), Error);
}

TEST_CASE("without refraction W_U(x, y) reduces to W(x - y)") {
  for (const auto& s : {cpp(2.0, 1.0, 1.0), cpp(0.5, 1.0, 1.0), LevySpec::stable(1.5)})
    for (double q : {0.0, 1.0}) {
      const RefractedModel m(RefractedSpec(s, s), q);
      for (double x : {0.3, 1.0, 2.0})
        for (double y : {-1.0, -0.2, 0.0}) {
          if (y == 0.0 && !s.bounded_variation()) {
            CHECK_THROWS_AS(m.w_u(x, y), Error);
            continue;
          }
          CHECK(rel_gap(m.w_u(x, y).value, m.x_eval().w(x - y)) < 1e-7);
        }
      for (double x : {0.3, 1.5}) CHECK(rel_gap(m.w_u_bar(x).value, std::exp(m.x_eval().phi() * x)) < 1e-7);
    }
}

TEST_CASE("drift refraction: generalized formulas match the convolution oracle") {
  const LevySpec x = cpp(2.0, 1.0, 1.0);
  const double alpha = 0.5;
  const RefractedSpec rs(x, cpp(2.5, 1.0, 1.0));
  const std::vector<double> xs = {-0.8, -0.3, 0.0, 0.4, 0.9};
  const std::vector<double> ys = {-0.9, -0.45, -0.1, 0.3, 0.75};
  const double b = -1.0, a = 1.0;
  for (double q : {0.0, 1.0}) {
    const RefractedModel m(rs, q);
    const KlOracle kl(x, alpha, q);
    CHECK(rel_gap(m.w_u(1.0, -1.0).value, kl.w_u(1.0, -1.0)) < 1e-8);
    CHECK(rel_gap(m.w_u(1.0, -1.0).value, kl_w_u(x, alpha, q, 1.0, -1.0)) < 1e-8);
    for (double x0 : xs) {
      CHECK(rel_gap(m.exit_up(b, x0, a), kl.exit_up(b, x0, a)) < 1e-5);
      for (double y : ys) {
        const double mine = m.killed_potential_density(b, a, x0, y);
        const double ref = kl.killed_potential_density(b, a, x0, y);
        CHECK(std::abs(mine - ref) <= 1e-5 * std::max(1.0, std::abs(ref)));
      }
    }
    // Approaching the upper barrier the density tends to ratio / delta_X.
    const double ratio = m.exit_up(b, -0.3, a);
    CHECK(m.killed_potential_density(b, a, -0.3, a) == doctest::Approx(ratio / 2.0).epsilon(1e-12));
    CHECK(kl_killed_potential_density(x, alpha, q, b, a, -0.3, a) == doctest::Approx(ratio / 2.0).epsilon(1e-9));
  }
  const RefractedModel m(rs, 1.0);
  const KlOracle kl(x, alpha, 1.0);
  for (double y : ys) {
    const auto f = LineFunction::indicator(y - 0.25, y + 0.25);
    const Resolvent r(m, f);
    for (double x0 : xs) CHECK(rel_gap(r(x0), kl.resolvent(x0, f)) < 1e-5);
  }
}

TEST_CASE("drift refraction oracle: degenerate cases") {
  const LevySpec x = cpp(2.0, 1.0, 1.0);
  const ScaleEvaluator wy(cpp(2.5, 1.0, 1.0), 0.4);
  CHECK(kl_w_u(x, 0.5, 0.4, -0.3, -1.0) == wy.w(0.7));
  const ScaleEvaluator wx(x, 0.4);
  CHECK(kl_w_u(x, 1e-9, 0.4, 1.2, -0.5) == doctest::Approx(wx.w(1.7)).epsilon(1e-8));
  CHECK_THROWS_AS(kl_w_u(LevySpec::stable(1.5), 0.5, 0.0, 1.0, -1.0), Error);
}

TEST_CASE("positive-side motion with Phi_X(0) > 0 still matches the oracle") {
  // Psi_X'(0) < 0 here, so the exponential weight inside the bracket matters.
  const LevySpec x = cpp(0.5, 1.0, 1.0);
  const RefractedSpec rs(x, cpp(1.5, 1.0, 1.0));
  for (double q : {0.0, 0.7}) {
    const RefractedModel m(rs, q);
    const KlOracle kl(x, 1.0, q);
    for (double x0 : {0.2, 1.0, 2.5})
      for (double y : {-1.5, -0.4, 0.0}) CHECK(rel_gap(m.w_u(x0, y).value, kl.w_u(x0, y)) < 1e-7);
    CHECK(rel_gap(m.exit_up(-1.0, 0.5, 2.0), kl.exit_up(-1.0, 0.5, 2.0)) < 1e-7);
  }
}

TEST_CASE("normalization constant: two routes and the single-process reduction") {
  for (const auto& rs : {cpp_pair(), stable_pair()})
    for (double q : {0.5, 1.0, 2.0}) {
      const RefractedModel m(rs, q);
      const Resolvent r(m, LineFunction::constant(1.0));
      CHECK(rel_gap(m.normalization_constant().value, q * r.n_u_one().value) < 1e-6);
    }
  for (const auto& s : {cpp(2.0, 1.0, 1.0), cpp(0.5, 1.0, 1.0), LevySpec::stable(1.5)})
    for (double q : {0.5, 2.0}) {
      const double expected = psi_prime(s, phi(s, q));
      CHECK(rel_gap(normalization_constant(RefractedSpec(s, s), q), expected) < 1e-6);
    }
  // As q falls to 0 with Phi_Y(0) = 0 the bracket vanishes, leaving Psi_X'(0).
  const RefractedSpec rs(cpp(2.0, 1.0, 1.0), LevySpec::stable(1.5));
  CHECK(std::abs(normalization_constant(rs, 1e-8) - 1.0) < 1e-3);
  CHECK_THROWS_AS(normalization_constant(rs, 0.0), Error);
}

TEST_CASE("total resolvent mass is 1/q") {
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const RefractedModel m(rs, 1.0);
    const Resolvent r(m, LineFunction::constant(1.0));
    for (double x : {-1.0, 0.0, 1.0}) CHECK(std::abs(r(x) - 1.0) < 1e-6);
    CHECK(std::abs(resolvent(rs, 1.0, 0.5, LineFunction::constant(1.0)) - 1.0) < 1e-6);
  }
}

TEST_CASE("resolvent splits additively over disjoint sets") {
  const RefractedModel m(stable_pair(), 1.0);
  const Resolvent below(m, LineFunction::indicator(-std::numeric_limits<double>::infinity(), 0.0));
  const Resolvent above(m, LineFunction::indicator(0.0, std::numeric_limits<double>::infinity()));
  for (double x : {-0.7, 0.0, 0.6}) {
    CHECK(below(x) > 0.0);
    CHECK(above(x) > 0.0);
    CHECK(std::abs(below(x) + above(x) - 1.0) < 1e-6);
  }
  CHECK(above(0.6) > above(0.0));
  CHECK(above(0.0) > above(-0.7));
}

TEST_CASE("resolvent equation at 0 for the indicator of the positive half-line") {
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const auto f = LineFunction::indicator(0.0, std::numeric_limits<double>::infinity());
    // The identity only needs 1e-3, so the nested paths run coarse.
    AnalyticsOptions coarse;
    coarse.rel_tol = 1e-7;
    coarse.nested_rel_tol = 1e-5;
    coarse.inner_rel_tol = 1e-7;
    const RefractedModel m1(rs, 1.0, coarse);
    const RefractedModel m2(rs, 2.0, coarse);
    const Resolvent r1(m1, f);
    const Resolvent r2(m2, f);
    const double lhs = r1.at_zero() - r2.at_zero();
    const double rhs = resolvent_of_resolvent_at_zero(m1, r2);
    CHECK(std::abs(lhs - rhs) < 1e-3);
  }
}

TEST_CASE("Gerber-Shiu cross-check of the one-sided scale function") {
  // W-bar_U(x) - W_X(x) * normalization is a Gerber-Shiu integral of e^{Phi_Y(q) u}.
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const RefractedModel m(rs, 1.0);
    const double py = m.y_eval().phi();
    const double norm = m.normalization_constant().value;
    for (double x : {0.5, 1.5}) {
      const double via_bar = m.w_u_bar(x).value - m.x_eval().w(x) * norm;
      const double via_kernel =
          gerber_shiu_integrate(m.x_eval(), BarrierMode::none(), x, [&](double u, double) { return std::exp(py * u); })
              .value;
      const double via_undershoot =
          gerber_shiu_by_undershoot(m.x_eval(), x, [&](double u) { return std::exp(py * u); }).value;
      CHECK(rel_gap(via_kernel, via_undershoot) < 1e-8);
      CHECK(std::abs(via_bar - via_kernel) < 1e-7 * m.w_u_bar(x).value);
    }
  }
}

TEST_CASE("one-sided scale function is continuous and increasing") {
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const RefractedModel m(rs, 1.0);
    CHECK(m.w_u_bar(0.0).value == 1.0);
    double last = 0.0;
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const double v = m.w_u_bar(x).value;
      CHECK(v > last);
      last = v;
    }
  }
  // Spot continuity at 0 where Phi_Y(q) is small enough for a 1e-2 window.
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const RefractedModel m(rs, 0.0);
    CHECK(std::abs(m.w_u_bar(0.01).value - 1.0) < 1e-2);
    CHECK(std::abs(m.w_u_bar(-0.01).value - 1.0) < 1e-2);
  }
  // Refining the grid shrinks the largest step between neighbours.
  const RefractedModel m(stable_pair(), 1.0);
  auto max_step = [&](int points) {
    double worst = 0.0;
    double prev = m.w_u_bar(-2.0).value;
    for (int i = 1; i < points; ++i) {
      const double v = m.w_u_bar(-2.0 + 4.0 * i / (points - 1)).value;
      CHECK(v >= prev);
      worst = std::max(worst, v - prev);
      prev = v;
    }
    return worst;
  };
  const double coarse = max_step(50);
  const double fine = max_step(200);
  CHECK(fine < 0.5 * coarse);
}

TEST_CASE("two-sided exit approaches the one-sided limit") {
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const RefractedModel m(rs, 1.0);
    for (double x : {-0.5, 0.0, 0.5}) {
      const double one = m.exit_up_one_sided(x, 1.0);
      double prev_gap = 1.0;
      for (double b : {-5.0, -10.0, -20.0}) {
        const double gap = std::abs(m.exit_up(b, x, 1.0) - one);
        CHECK(gap <= prev_gap);
        prev_gap = gap;
      }
      CHECK(prev_gap < 1e-4);
    }
  }
  // Both motions drift upwards, so at q = 0 survival to a has positive probability.
  const RefractedModel m0(cpp_pair(), 0.0);
  const double p = m0.exit_up_one_sided(0.0, 1.0);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("exit transform is a monotone probability") {
  for (const auto& rs : {cpp_pair(), stable_pair()}) {
    const double b = -1.0, a = 1.0;
    std::vector<double> at_lower_q;
    for (double q : {0.0, 0.5, 2.0}) {
      const RefractedModel m(rs, q);
      CHECK(m.exit_up(b, a, a) == 1.0);
      CHECK(m.exit_up_one_sided(a, a) == 1.0);
      double prev = -1.0;
      std::vector<double> row;
      for (int i = 0; i <= 8; ++i) {
        const double x = b + (a - b) * i / 8.0;
        const double e = m.exit_up(b, x, a);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        CHECK(e >= prev);
        prev = e;
        row.push_back(e);
      }
      if (!at_lower_q.empty())
        for (std::size_t i = 0; i < row.size(); ++i) CHECK(row[i] <= at_lower_q[i] + 1e-12);
      at_lower_q = row;
    }
  }
  CHECK(exit_up(cpp_pair(), 0.0, -1.0, 0.0, 1.0) ==
        doctest::Approx(ScaleEvaluator(cpp(1.2, 1.0, 2.0), 0.0).w(1.0) / w_u(cpp_pair(), 0.0, 1.0, -1.0)));
  CHECK_THROWS_AS(exit_up(cpp_pair(), 0.0, 0.5, 0.7, 1.0), Error);
}

TEST_CASE("stable negative-side motion: exit and density vanish at the lower barrier") {
  const RefractedSpec rs(cpp(2.0, 1.0, 1.0), LevySpec::stable(1.5));
  const RefractedModel m(rs, 0.0);
  CHECK(m.exit_up(-1.0, -1.0, 1.0) == 0.0);
  for (double y : {-0.5, 0.5}) CHECK(m.killed_potential_density(-1.0, 1.0, -1.0, y) == 0.0);
}

TEST_CASE("killed density: positive targets from below only see the upper-barrier term") {
  const RefractedModel m(cpp_pair(), 0.5);
  for (double x : {-0.7, 0.0})
    for (double y : {0.2, 0.8})
      CHECK(m.killed_potential_density(-1.0, 1.0, x, y) ==
            doctest::Approx(m.exit_up(-1.0, x, 1.0) * m.x_eval().w(1.0 - y)).epsilon(1e-14));
  CHECK_THROWS_AS(m.killed_potential_density(-1.0, 1.0, 0.5, 0.0), Error);
  CHECK_THROWS_AS(m.killed_potential_density(-1.0, 1.0, 0.5, 1.5), Error);
}

TEST_CASE("positive branch tends to W_Y(-y) at 0 for unbounded-variation X") {
  // W_X(0) = 0, yet the bracket integral keeps a W_Y(-y) contribution, so the
  // two branches meet at 0.
  const RefractedModel m(stable_pair(), 1.0);
  const double target = m.y_eval().w(1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double x : {1e-1, 1e-2, 1e-3}) {
    const double gap = std::abs(m.w_u_positive_branch(x, -1.0).value - target);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-2 * target);
  CHECK(m.w_u(0.0, -1.0).value == target);
}

TEST_CASE("validity certificate holds for the supported families") {
  for (const auto& rs : {cpp_pair(), stable_pair(), RefractedSpec(LevySpec::stable(1.2), LevySpec::stable(1.8))}) {
    CHECK(rs.certificate().x_no_gaussian_ok);
    CHECK(rs.certificate().convergence_ok);
    CHECK_NOTHROW(rs.require_valid());
  }
}
