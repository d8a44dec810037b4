#pragma once

// Numerical Laplace inversion by Euler summation. An independent oracle for
// the closed-form scale functions; never the primary evaluation path.

#include <complex>
#include <functional>

#include "refracted/levy_model.hpp"

namespace refracted {

// Extended precision: the Euler weights amplify round-off by 10^{M/3}.
using LaplaceTransform = std::function<std::complex<long double>(std::complex<long double>)>;

// Inverts F at t > 0 with 2M+1 transform evaluations.
double laplace_invert_euler(const LaplaceTransform& transform, double t, int m = 30);

// W^(q)(x) recovered from 1/(Psi(beta) - q), damped by e^{-sx} with s above
// Phi(q) so that the Bromwich contour stays in the region of convergence.
double scale_w_by_inversion(const LevySpec& spec, double q, double x, int m = 30);

}  // namespace refracted
