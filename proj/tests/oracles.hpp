#pragma once

// Independent reference implementations used only by the tests. None of
// these share code paths with the library routines they check.

#include <functional>
#include <vector>

#include "refracted/levy_model.hpp"

namespace oracle {

// Direct summation of the Mittag-Leffler series in long double.
long double ml_series(long double alpha, long double beta, long double z, int terms = 200);

// Roots of (Psi(theta) - q) * prod(mu_i + theta) from companion-matrix eigenvalues.
std::vector<double> cpp_roots_companion(const refracted::LevySpec& spec, double q);

// Compound Poisson scale function by partial fractions over the companion roots,
// with residues from the polynomial product formula.
double cpp_w_companion(const refracted::LevySpec& spec, double q, double x);

// Composite fixed-order Gauss-Legendre rule (nodes by Golub-Welsch).
double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels,
                      int order = 20);

}  // namespace oracle
