#include "oracles.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>

namespace oracle {

long double ml_series(long double alpha, long double beta, long double z, int terms) {
  long double sum = 0.0L;
  for (int k = 0; k < terms; ++k) {
    const long double arg = alpha * k + beta;
    sum += std::exp(k * std::log(z) - std::lgamma(arg));
  }
  return sum;
}

namespace {

using Poly = std::vector<double>;  // coefficient of theta^k at index k

Poly multiply(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Poly add(Poly a, const Poly& b) {
  if (b.size() > a.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace

std::vector<double> cpp_roots_companion(const refracted::LevySpec& spec, double q) {
  const auto m = spec.mu.size();
  Poly p = {-q, spec.delta};
  for (Eigen::Index i = 0; i < m; ++i) p = multiply(p, {spec.mu[i], 1.0});
  for (Eigen::Index i = 0; i < m; ++i) {
    Poly term = {0.0, -spec.lambda[i]};
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) term = multiply(term, {spec.mu[k], 1.0});
    p = add(p, term);
  }
  const int deg = static_cast<int>(p.size()) - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -p[i] / p[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()[i].real());
  std::sort(roots.begin(), roots.end());
  return roots;
}

double cpp_w_companion(const refracted::LevySpec& spec, double q, double x) {
  if (x < 0.0) return 0.0;
  const auto roots = cpp_roots_companion(spec, q);
  double w = 0.0;
  for (std::size_t j = 0; j < roots.size(); ++j) {
    double num = 1.0;
    for (Eigen::Index i = 0; i < spec.mu.size(); ++i) num *= spec.mu[i] + roots[j];
    double den = spec.delta;
    for (std::size_t k = 0; k < roots.size(); ++k)
      if (k != j) den *= roots[j] - roots[k];
    w += num / den * std::exp(roots[j] * x);
  }
  return w;
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels, int order) {
  static std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache;
  auto it = cache.find(order);
  if (it == cache.end()) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
    for (int i = 1; i < order; ++i) {
      const double beta = i / std::sqrt(4.0 * i * i - 1.0);
      jac(i, i - 1) = beta;
      jac(i - 1, i) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    Eigen::VectorXd nodes = es.eigenvalues();
    Eigen::VectorXd weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    it = cache.emplace(order, std::make_pair(nodes, weights)).first;
  }
  const auto& [nodes, weights] = it->second;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) sum += weights[i] * f(c + 0.5 * h * nodes[i]);
  }
  return 0.5 * h * sum;
}

}  // namespace oracle
