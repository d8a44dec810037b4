#pragma once

#include <vector>

namespace refracted {

// E_{alpha,beta}(z) for alpha in (0,2], beta > 0, z >= 0. Power series up to
// z = 50, exponential term plus remainder integral beyond.
double mittag_leffler(double alpha, double beta, double z);

double mittag_leffler_series(double alpha, double beta, double z);

// E_{alpha,beta}(z) - z^{(1-beta)/alpha} e^{z^{1/alpha}} / alpha as a one-dimensional
// integral over the branch cut; alpha in (0,2), z > 0. Free of cancellation.
double mittag_leffler_remainder(double alpha, double beta, double z);
double mittag_leffler_exponential(double alpha, double beta, double z);

// Classical asymptotic expansion, exponential term minus the divergent
// algebraic series sum_{k>=1} z^{-k} / Gamma(beta - alpha k) cut at its
// smallest term. Diagnostic only: its error is not controlled near alpha = 2.
double mittag_leffler_asymptotic(double alpha, double beta, double z);
double mittag_leffler_algebraic_tail(double alpha, double beta, double z);

// Relative gap between series and exponential forms at the crossover point.
// Throws TOL_NOT_MET when it exceeds 1e-8.
double mittag_leffler_crossover_check(double alpha, double beta);

// 1/Gamma(x), zero at the poles.
double reciprocal_gamma(double x);

inline constexpr double kMittagLefflerCrossover = 50.0;

// The power series on [0, kMittagLefflerCrossover] with its coefficients
// precomputed, for repeated evaluation at fixed (alpha, beta).
class MittagLefflerSeries {
 public:
  MittagLefflerSeries() = default;
  MittagLefflerSeries(double alpha, double beta);
  double operator()(double z) const;
  bool empty() const { return scaled_.empty(); }

 private:
  // zmax^k / Gamma(alpha k + beta), evaluated by Horner in z / zmax.
  std::vector<double> scaled_;
};

}  // namespace refracted
