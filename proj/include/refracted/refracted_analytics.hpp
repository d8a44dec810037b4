#pragma once

// Exit transforms, resolvents and killed potential densities of the
// refracted process U that moves as X on [0, inf) and as Y on (-inf, 0).

#include <functional>
#include <limits>
#include <stop_token>
#include <vector>

#include "refracted/levy_model.hpp"
#include "refracted/scale_engine.hpp"

namespace refracted {

struct ValidityCertificate {
  bool x_no_gaussian_ok = false;
  bool convergence_ok = false;
  bool valid() const { return x_no_gaussian_ok && convergence_ok; }
};

class RefractedSpec {
 public:
  RefractedSpec(LevySpec x, LevySpec y);

  const LevySpec& x() const { return x_; }
  const LevySpec& y() const { return y_; }
  const ValidityCertificate& certificate() const { return cert_; }
  // Throws CERT_INVALID naming the failed flag.
  void require_valid() const;

 private:
  LevySpec x_;
  LevySpec y_;
  ValidityCertificate cert_;
};

using KernelIntegralResult = IntegralResult;

struct AnalyticsOptions {
  // Double integrals against the jump measure.
  double rel_tol = 1e-8;
  // Outer integrals of resolvent paths, whose integrands are themselves quadratures.
  double nested_rel_tol = 1e-6;
  // Innermost one-dimensional integrals feeding nested paths.
  double inner_rel_tol = 1e-10;
  std::stop_token stop;
};

// Scale functions of X and Y bound at one q, with every functional of U that
// is built from them.
class RefractedModel {
 public:
  RefractedModel(RefractedSpec rs, double q, AnalyticsOptions opts = {});

  const RefractedSpec& spec() const { return rs_; }
  double q() const { return q_; }
  const AnalyticsOptions& options() const { return opts_; }
  const ScaleEvaluator& x_eval() const { return x_; }
  const ScaleEvaluator& y_eval() const { return y_; }

  // W_U(x, y) for y <= min(x, 0). At x = 0 the x <= 0 branch is used.
  KernelIntegralResult w_u(double x, double y) const;
  // The x > 0 expression evaluated at any x >= 0, for inspecting the branch at 0.
  KernelIntegralResult w_u_positive_branch(double x, double y) const;
  KernelIntegralResult w_u_bar(double x) const;

  double exit_up(double b, double x, double a) const;
  double exit_up_one_sided(double x, double a) const;
  double killed_potential_density(double b, double a, double x, double y) const;

  // n^U(1 - e^{-q T_0}) from the joint-bracket double integral; q > 0.
  KernelIntegralResult normalization_constant() const;

 private:
  RefractedSpec rs_;
  double q_;
  AnalyticsOptions opts_;
  ScaleEvaluator x_;
  ScaleEvaluator y_;
  double phi_x0_;
  double phi_y0_;
  double mean_part_;  // Psi_X'(0) v 0
};

// A test function on the line. f must vanish outside [lo, hi] and be smooth
// between breakpoints. Its value at 0 is irrelevant: U spends no time there.
struct LineFunction {
  std::function<double(double)> f;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::vector<double> breakpoints;

  static LineFunction constant(double c);
  static LineFunction indicator(double lo, double hi);
};

// R_U f bound to one model and one f; R_U f(0) is computed once on construction.
class Resolvent {
 public:
  Resolvent(const RefractedModel& model, LineFunction f);

  // N_U f and N_U 1 through the undershoot marginal of the K kernel.
  KernelIntegralResult n_u() const { return n_f_; }
  KernelIntegralResult n_u_one() const { return n_one_; }
  double at_zero() const { return at_zero_; }
  double operator()(double x) const;

  // Potential of Y killed on hitting 0, started at u < 0.
  double killed_y(double u) const;
  // Potential of X killed on passing below 0, started at x > 0.
  double killed_x(double x) const;

 private:
  KernelIntegralResult compute_n(const LineFunction& g) const;
  double killed_y_of(const LineFunction& g, double u) const;

  const RefractedModel* model_;
  LineFunction f_;
  KernelIntegralResult n_f_;
  KernelIntegralResult n_one_;
  double at_zero_ = 0.0;
};

// Undershoot-marginal densities of the jump-measure kernels, integrated
// against a function g of the undershoot u < 0 alone:
//   K route:  int g(u) e^{-Phi(q) v} tilde-Pi(du dv)
//   GS route: int g(u) r_(x, v) tilde-Pi(du dv), r_ the potential density
//             of Z killed below 0.
IntegralResult k_kernel_by_undershoot(const ScaleEvaluator& ev, const std::function<double(double)>& g,
                                      std::vector<double> u_breakpoints = {}, double rel_tol = 1e-8,
                                      double inner_rel_tol = 1e-10, std::stop_token stop = {});
IntegralResult gerber_shiu_by_undershoot(const ScaleEvaluator& ev, double x, const std::function<double(double)>& g,
                                         std::vector<double> u_breakpoints = {}, double rel_tol = 1e-8,
                                         double inner_rel_tol = 1e-10, std::stop_token stop = {});

double w_u(const RefractedSpec& rs, double q, double x, double y);
double w_u_bar(const RefractedSpec& rs, double q, double x);
double exit_up(const RefractedSpec& rs, double q, double b, double x, double a);
double exit_up_one_sided(const RefractedSpec& rs, double q, double x, double a);
double killed_potential_density(const RefractedSpec& rs, double q, double b, double a, double x, double y);
double resolvent(const RefractedSpec& rs, double q, double x, const LineFunction& f, double tol = 1e-6);
double normalization_constant(const RefractedSpec& rs, double q);

// The drift-refraction special case Y = X + alpha t, for bounded-variation X,
// through its one-dimensional convolution formula. Oracle only.
class KlOracle {
 public:
  KlOracle(const LevySpec& x_spec, double alpha, double q, double rel_tol = 1e-12);

  const LevySpec& y_spec() const { return y_.spec(); }
  double w_u(double x, double y) const;
  double exit_up(double b, double x, double a) const;
  double killed_potential_density(double b, double a, double x, double y) const;
  // Whole-line resolvent approximated by the density killed outside [-L, L].
  double resolvent(double x, const LineFunction& f, double half_width = 30.0) const;

 private:
  double alpha_;
  double rel_tol_;
  ScaleEvaluator x_;
  ScaleEvaluator y_;
};

double kl_w_u(const LevySpec& x_spec, double alpha, double q, double x, double y);
double kl_killed_potential_density(const LevySpec& x_spec, double alpha, double q, double b, double a, double x,
                                   double y);

}  // namespace refracted
