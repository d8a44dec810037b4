#include "refracted/mittag_leffler.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <sstream>

#include "refracted/error.hpp"
#include "refracted/quadrature.hpp"

namespace refracted {

double reciprocal_gamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  if (x < 170.0) return 1.0 / std::tgamma(x);
  return 0.0;
}

double mittag_leffler_series(double alpha, double beta, double z) {
  if (z == 0.0) return reciprocal_gamma(beta);
  // All terms are positive for z > 0, so plain summation is stable.
  const double logz = std::log(z);
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double arg = alpha * k + beta;
    double term;
    if (arg < 160.0 && k * logz < 700.0)
      term = std::pow(z, k) / std::tgamma(arg);
    else
      term = std::exp(k * logz - std::lgamma(arg));
    sum += term;
    // Terms decrease once alpha k + beta exceeds z^{1/alpha}.
    if (term <= 1e-17 * sum && arg > std::pow(z, 1.0 / alpha) + 2.0) return sum;
  }
  throw Error(Errc::TolNotMet, "Mittag-Leffler series did not converge");
}

double mittag_leffler_algebraic_tail(double alpha, double beta, double z) {
  double sum = 0.0;
  double zpow = 1.0;
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    zpow /= z;
    const double term = zpow * reciprocal_gamma(beta - alpha * k);
    const double mag = std::abs(term);
    if (mag != 0.0) {
      // Divergent asymptotic series: stop at the smallest term.
      if (mag > last) break;
      last = mag;
    }
    sum += term;
    if (mag != 0.0 && mag <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

double mittag_leffler_asymptotic(double alpha, double beta, double z) {
  const double root = std::pow(z, 1.0 / alpha);
  const double main = std::pow(z, (1.0 - beta) / alpha) * std::exp(root) / alpha;
  return main - mittag_leffler_algebraic_tail(alpha, beta, z);
}

double mittag_leffler_remainder(double alpha, double beta, double z) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw Error(Errc::Domain, "remainder integral needs alpha in (0,2)");
  if (!(z > 0.0)) throw Error(Errc::Domain, "remainder integral needs z > 0");
  // Hankel contour collapsed onto the negative axis after removing the
  // residue at z^{1/alpha}; no other pole lies on the principal sheet.
  const double c = std::cos(M_PI * alpha);
  const double s_beta = std::sin(M_PI * beta);
  const double s_diff = std::sin(M_PI * (alpha - beta));
  auto integrand = [&](double r) {
    if (r == 0.0) return 0.0;
    const double ra = std::pow(r, alpha);
    const double den = ra * ra - 2.0 * ra * z * c + z * z;
    return std::exp(-r) * std::pow(r, alpha - beta) * (ra * s_beta + z * s_diff) / den;
  };
  const double peak = std::pow(z, 1.0 / alpha);
  QuadOptions opts;
  opts.rel_tol = 1e-13;
  std::vector<double> bps = {0.5 * peak, peak, 2.0 * peak};
  // e^{-r} keeps most of the mass near r = 1 however far out the peak sits.
  for (double r = 1.0; r < 0.5 * peak; r *= 2.0) bps.push_back(r);
  return integrate_line(integrand, 0.0, std::numeric_limits<double>::infinity(), bps, opts,
                        std::max(1.0, peak)).value /
         M_PI;
}

double mittag_leffler_exponential(double alpha, double beta, double z) {
  const double root = std::pow(z, 1.0 / alpha);
  const double main = std::pow(z, (1.0 - beta) / alpha) * std::exp(root) / alpha;
  return main + mittag_leffler_remainder(alpha, beta, z);
}

double mittag_leffler(double alpha, double beta, double z) {
  if (!(alpha > 0.0 && alpha <= 2.0) || !(beta > 0.0))
    throw Error(Errc::Domain, "Mittag-Leffler parameters out of range");
  if (!(z >= 0.0)) throw Error(Errc::Domain, "Mittag-Leffler argument must be >= 0");
  // At alpha = 2 a second pole sits on the cut; the series is used throughout.
  if (z <= kMittagLefflerCrossover || alpha == 2.0) return mittag_leffler_series(alpha, beta, z);
  return mittag_leffler_exponential(alpha, beta, z);
}

double mittag_leffler_crossover_check(double alpha, double beta) {
  const double z = kMittagLefflerCrossover;
  const double s = mittag_leffler_series(alpha, beta, z);
  const double a = mittag_leffler_exponential(alpha, beta, z);
  const double gap = std::abs(s - a) / std::abs(s);
  if (!(gap <= 1e-8)) {
    std::ostringstream msg;
    msg << "Mittag-Leffler crossover gap " << gap << " for alpha=" << alpha << ", beta=" << beta;
    throw Error(Errc::TolNotMet, msg.str());
  }
  return gap;
}

MittagLefflerSeries::MittagLefflerSeries(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha <= 2.0) || !(beta > 0.0))
    throw Error(Errc::Domain, "Mittag-Leffler parameters out of range");
  const double logz = std::log(kMittagLefflerCrossover);
  // Every term is positive, so the sum is at least the largest term; stop
  // once the remaining coefficients cannot reach 1e-18 of it.
  double largest = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const double arg = alpha * k + beta;
    const double c = arg < 160.0 && k * logz < 700.0 ? std::pow(kMittagLefflerCrossover, k) / std::tgamma(arg)
                                                     : std::exp(k * logz - std::lgamma(arg));
    scaled_.push_back(c);
    largest = std::max(largest, c);
    // Past the peak the coefficients fall faster than geometrically.
    if (arg > 2.0 * std::pow(kMittagLefflerCrossover, 1.0 / alpha) + 10.0 && c < 1e-18 * largest) return;
  }
  throw Error(Errc::TolNotMet, "Mittag-Leffler coefficient table did not terminate");
}

double MittagLefflerSeries::operator()(double z) const {
  if (!(z >= 0.0 && z <= kMittagLefflerCrossover)) throw Error(Errc::Domain, "tabulated series needs z in [0, 50]");
  const double u = z / kMittagLefflerCrossover;
  double acc = 0.0;
  for (auto it = scaled_.rbegin(); it != scaled_.rend(); ++it) acc = acc * u + *it;
  return acc;
}

}  // namespace refracted
