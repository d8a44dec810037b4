#include "refracted/laplace_inversion.hpp"

#include <cmath>
#include <vector>

#include "refracted/error.hpp"

namespace refracted {

double laplace_invert_euler(const LaplaceTransform& transform, double t, int m) {
  if (!(t > 0.0)) throw Error(Errc::Domain, "Laplace inversion requires t > 0");
  // Binomial averaging weights for the alternating tail.
  std::vector<long double> xi(2 * m + 1, 1.0L);
  xi[0] = 0.5L;
  const long double two_m = std::ldexp(1.0L, -m);
  xi[2 * m] = two_m;
  long double binom = 1.0L;
  for (int k = 1; k < m; ++k) {
    binom = binom * (m - k + 1) / k;
    xi[2 * m - k] = xi[2 * m - k + 1] + two_m * binom;
  }
  const long double shift = m * std::log(10.0L) / 3.0L;
  const long double pi = std::acos(-1.0L);
  long double sum = 0.0L;
  for (int k = 0; k <= 2 * m; ++k) {
    const std::complex<long double> beta(shift, pi * k);
    const long double eta = (k % 2 == 0 ? 1.0L : -1.0L) * xi[k];
    sum += eta * transform(beta / static_cast<long double>(t)).real();
  }
  return static_cast<double>(std::pow(10.0L, m / 3.0L) / t * sum);
}

double scale_w_by_inversion(const LevySpec& spec, double q, double x, int m) {
  if (!(x > 0.0)) throw Error(Errc::Domain, "inversion oracle requires x > 0");
  const long double s = phi(spec, q) + 1.0;
  auto damped = [&](std::complex<long double> beta) {
    return 1.0L / (laplace_exponent(spec, beta + s) - static_cast<long double>(q));
  };
  return std::exp(s * x) * laplace_invert_euler(damped, x, m);
}

}  // namespace refracted
