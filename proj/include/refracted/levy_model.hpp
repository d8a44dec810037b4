#pragma once

// Spectrally negative Levy processes in two parametric families: compound
// Poisson with hyperexponential jumps plus drift, and the stable law with
// Psi(theta) = theta^alpha.

#include <Eigen/Core>
#include <complex>
#include <functional>
#include <stop_token>
#include <vector>

namespace refracted {

enum class Family { CppHyperexp, Stable };

struct LevySpec {
  Family family = Family::CppHyperexp;
  // Compound Poisson part: drift and exponential mixture components.
  double delta = 0.0;
  Eigen::ArrayXd lambda;
  Eigen::ArrayXd mu;
  // Stable part: index and the density constant c with Pi(dy) = c|y|^(-1-alpha)dy.
  double alpha = 0.0;
  double c_alpha = 0.0;

  static LevySpec cpp(double delta, Eigen::ArrayXd lambda, Eigen::ArrayXd mu);
  static LevySpec stable(double alpha);

  bool bounded_variation() const { return family == Family::CppHyperexp; }
};

// Laplace exponent for real or complex arguments; no domain checks.
template <class Scalar>
Scalar laplace_exponent(const LevySpec& s, const Scalar& theta) {
  if (s.family == Family::Stable) return std::pow(theta, Scalar(s.alpha));
  Scalar acc = Scalar(s.delta) * theta;
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i)
    acc -= Scalar(s.lambda[i]) * theta / (Scalar(s.mu[i]) + theta);
  return acc;
}

double psi(const LevySpec& spec, double theta);
double psi_prime(const LevySpec& spec, double theta);
double phi(const LevySpec& spec, double q);

// Drift gamma in the (-1,0)-compensated Levy-Khintchine form.
double gamma_drift(const LevySpec& spec);
// Levy density of Pi at y = -t, t > 0.
double levy_density(const LevySpec& spec, double t);
// Pi((-inf, -t)), t > 0.
double levy_tail_mass(const LevySpec& spec, double t);
// Integral of |y| Pi(dy) over (-inf, -1).
double first_moment_beyond_one(const LevySpec& spec);

struct TruncatedSpec {
  LevySpec source;
  int n = 1;
  double drift = 0.0;
  double rate = 0.0;
  // Cumulative component probabilities for the hyperexponential sampler.
  Eigen::ArrayXd cumulative;
};

TruncatedSpec truncate(const LevySpec& spec, int n);

// Exponent of the truncated process, with the jump part computed by
// jump_integral against the truncated measure.
double truncated_psi(const TruncatedSpec& ts, double theta, double tol = 1e-10);

struct JumpIntegralOptions {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  // Jump magnitudes t > 0 where g(-t) is not smooth.
  std::vector<double> breakpoints;
  std::stop_token stop;
};

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
};

// Integral of g(theta) Pi(d theta) over theta < 0. For the stable family g
// must be O(theta^2) at 0-.
IntegralResult jump_integral(const LevySpec& spec, const std::function<double(double)>& g,
                             const JumpIntegralOptions& opts = {});
double jump_integral(const LevySpec& spec, const std::function<double(double)>& g, double tol);

}  // namespace refracted
