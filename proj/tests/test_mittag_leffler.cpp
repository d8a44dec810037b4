#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "refracted/error.hpp"
#include "refracted/mittag_leffler.hpp"

using namespace refracted;

TEST_CASE("Mittag-Leffler examples") {
  for (double beta : {0.5, 1.0, 1.5, 2.3})
    CHECK(mittag_leffler(1.5, beta, 0.0) == doctest::Approx(1.0 / std::tgamma(beta)).epsilon(1e-15));
  CHECK(mittag_leffler(1.0, 1.0, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  const double oracle = static_cast<double>(oracle::ml_series(1.5L, 1.5L, 2.0L));
  CHECK(mittag_leffler(1.5, 1.5, 2.0) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("Mittag-Leffler matches brute-force summation across both regimes") {
  for (double alpha : {1.2, 1.5, 1.8})
    for (double beta : {alpha, alpha - 1.0})
      for (double z : {0.01, 0.7, 5.0, 20.0, 49.0, 51.0, 80.0, 150.0, 300.0}) {
        const double oracle = static_cast<double>(oracle::ml_series(alpha, beta, z, 900));
        CHECK(mittag_leffler(alpha, beta, z) == doctest::Approx(oracle).epsilon(1e-11));
      }
}

TEST_CASE("E_{2,1}(z) = cosh(sqrt z) and E_{1,2}(z) = expm1(z)/z on the series range") {
  for (double z : {0.5, 10.0, 45.0}) {
    CHECK(mittag_leffler(2.0, 1.0, z) == doctest::Approx(std::cosh(std::sqrt(z))).epsilon(1e-12));
    CHECK(mittag_leffler(1.0, 2.0, z) == doctest::Approx(std::expm1(z) / z).epsilon(1e-12));
  }
}

TEST_CASE("remainder integral matches series minus exponential term") {
  for (double alpha : {1.2, 1.5, 1.8})
    for (double beta : {alpha, alpha - 1.0})
      for (double z : {0.05, 1.0, 8.0}) {
        const long double main = std::pow(z, (1.0L - beta) / alpha) * std::exp(std::pow((long double)z, 1.0L / alpha)) / alpha;
        const double oracle = static_cast<double>(oracle::ml_series(alpha, beta, z) - main);
        CHECK(mittag_leffler_remainder(alpha, beta, z) == doctest::Approx(oracle).epsilon(1e-9));
      }
}

TEST_CASE("classical asymptotic expansion is close for moderate alpha") {
  const double z = 200.0;
  CHECK(mittag_leffler_asymptotic(1.5, 1.5, z) == doctest::Approx(mittag_leffler(1.5, 1.5, z)).epsilon(1e-12));
}

TEST_CASE("series and exponential forms agree in the crossover band") {
  for (double alpha : {1.1, 1.5, 1.9, 1.99})
    for (double beta : {alpha, alpha - 1.0}) {
      CHECK_NOTHROW(mittag_leffler_crossover_check(alpha, beta));
      CHECK(mittag_leffler_crossover_check(alpha, beta) <= 1e-8);
    }
  CHECK_THROWS_AS(mittag_leffler(1.5, 1.5, -1.0), Error);
}

TEST_CASE("precomputed series matches direct summation") {
  for (double alpha : {1.05, 1.5, 1.99, 2.0})
    for (double beta : {alpha, alpha - 1.0, 1.0}) {
      if (!(beta > 0.0)) continue;
      const MittagLefflerSeries table(alpha, beta);
      for (double z = 0.0; z <= 50.0; z += 0.37)
        CHECK(table(z) == doctest::Approx(mittag_leffler_series(alpha, beta, z)).epsilon(1e-14));
      CHECK_THROWS_AS(table(50.5), Error);
    }
}
