#pragma once

// q-scale functions and the single-process fluctuation identities built on
// them: exit laws, potential densities, Gerber-Shiu and excursion kernels.

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <stop_token>
#include <vector>

#include "refracted/levy_model.hpp"
#include "refracted/mittag_leffler.hpp"

namespace refracted {

class ScaleEvaluator {
 public:
  ScaleEvaluator(LevySpec spec, double q);

  const LevySpec& spec() const { return spec_; }
  double q() const { return q_; }
  double phi() const { return phi_; }
  // Phi'(q) = 1/Psi'(Phi(q)); infinite when Psi'(Phi(q)) = 0.
  double phi_prime() const { return phi_prime_; }
  bool q_perturbed() const { return q_perturbed_; }

  double w(double x) const;
  double w_prime(double x) const;

  // W(x) - c e^{Phi x} with c = Phi'(q) when Psi'(Phi(q)) > 0, else W(x).
  // Used to cancel the leading growth analytically in potential densities.
  double w_excess(double x) const;
  bool has_leading_term() const { return leading_ > 0.0; }
  bool excess_tabulated() const { return excess_table_.size() > 0; }

  // Roots of Psi(theta) = q and residues 1/Psi'(root) (compound Poisson only).
  const Eigen::ArrayXd& roots() const { return roots_; }
  const Eigen::ArrayXd& residues() const { return residues_; }

 private:
  void build_cpp_roots();

  LevySpec spec_;
  double q_;
  double phi_ = 0.0;
  double phi_prime_ = 0.0;
  double leading_ = 0.0;
  bool q_perturbed_ = false;
  Eigen::ArrayXd roots_;
  Eigen::ArrayXd residues_;
  Eigen::Index lead_index_ = -1;
  // Stable series for W (beta = alpha) and W' (beta = alpha - 1).
  MittagLefflerSeries series_w_;
  MittagLefflerSeries series_w_prime_;
  // Chebyshev table for the stable excess at large q x^alpha; empty if unused.
  Eigen::ArrayXd excess_table_;
};

double scale_w(const ScaleEvaluator& ev, double x);
double scale_w_prime(const ScaleEvaluator& ev, double x);

struct BarrierMode {
  enum class Kind { None, Lower, Upper, Both };
  Kind kind = Kind::None;
  double b = -std::numeric_limits<double>::infinity();
  double a = std::numeric_limits<double>::infinity();

  static BarrierMode none() { return {}; }
  static BarrierMode lower(double b);
  static BarrierMode upper(double a);
  static BarrierMode both(double b, double a);
};

double exit_levy(const ScaleEvaluator& ev, const BarrierMode& mode, double x);
double potential_density_levy(const ScaleEvaluator& ev, const BarrierMode& mode, double x, double y);

// Size of the terms that cancel inside the killed-below-0 density from x,
// for round-off floors of integrals against it.
double density_term_scale(const ScaleEvaluator& ev, double x);

// Clamp policy shared by every density: values in [-1e-12, 0) become 0,
// anything more negative is an error.
double clamp_density(double value);

using KernelFunction = std::function<double(double u, double v)>;

struct KernelOptions {
  double rel_tol = 1e-8;
  double inner_rel_tol = 1e-10;
  double abs_tol = 0.0;
  // Locations where the integrand is not smooth, in v and in u = theta + v.
  std::vector<double> v_breakpoints;
  std::vector<double> u_breakpoints;
  // The integrand vanishes for v > v_max.
  double v_max = std::numeric_limits<double>::infinity();
  // Size of the individual terms that cancel inside h. Sets a round-off
  // floor for the inner integrals, whose values shrink like (-theta)^3.
  double term_scale = 0.0;
  std::stop_token stop;
};

// Integral of h(u,v) over the measure Pi(du - v)dv on u < 0 < v, computed as
// the outer jump integral of the inner v-integral over (0, -theta) with
// u = theta + v.
IntegralResult tilde_pi_integrate(const LevySpec& spec, const KernelFunction& h,
                                  const KernelOptions& opts = {});

// Gerber-Shiu integral E_x[e^{-q tau}f(Z_tau, Z_{tau-}); tau < inf (or < tau_a^+)]
// for tau the first passage below 0. Mode must be None or Upper(a).
IntegralResult gerber_shiu_integrate(const ScaleEvaluator& ev, const BarrierMode& mode, double x,
                                     const KernelFunction& f, const KernelOptions& opts = {});

enum class ExcursionKernel { K, KBar };

// Integral of f against e^{-Phi(q)v} tilde-Pi (K) or W(a-v)/W(a) tilde-Pi (KBar).
IntegralResult excursion_kernel_integrate(const ScaleEvaluator& ev, ExcursionKernel variant,
                                          double a, const KernelFunction& f,
                                          const KernelOptions& opts = {});

}  // namespace refracted
