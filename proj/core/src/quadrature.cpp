#include "rfasym/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace rfasym {

namespace {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// orthogonal polynomial recurrence, weights come from the first component
// of the normalized eigenvectors.
QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                            double total_mass) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success) throw QuadratureFailure("Golub-Welsch eigensolve failed");
  const int n = static_cast<int>(diag.size());
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = total_mass * v0 * v0;
  }
  return rule;
}

QuadratureRule make_hermite(int order) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(static_cast<double>(i));
  // weights normalized so that the rule computes E[f(Z)], Z ~ N(0,1)
  return golub_welsch(diag, sub, 1.0);
}

QuadratureRule make_legendre(int order) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int i = 1; i < order; ++i) {
    const double di = static_cast<double>(i);
    sub[i - 1] = di / std::sqrt(4.0 * di * di - 1.0);
  }
  return golub_welsch(diag, sub, 2.0);
}

const QuadratureRule& cached(std::map<int, std::unique_ptr<QuadratureRule>>& cache,
                             std::mutex& mutex, int order, QuadratureRule (*make)(int)) {
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end())
    it = cache.emplace(order, std::make_unique<QuadratureRule>(make(order))).first;
  return *it->second;
}

}  // namespace

const QuadratureRule& gauss_hermite(int order) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, order, make_hermite);
}

const QuadratureRule& gauss_legendre(int order) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, order, make_legendre);
}

namespace {

constexpr double kNormalTail = 12.0;

QuadratureRule make_split_normal(int order) {
  const QuadratureRule& gl = gauss_legendre(order);
  const double inv_sqrt_2pi = 0.3989422804014326779;
  QuadratureRule rule;
  rule.nodes.reserve(2 * order);
  rule.weights.reserve(2 * order);
  for (const auto [lo, hi] : {std::pair{-kNormalTail, 0.0}, std::pair{0.0, kNormalTail}}) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    for (int i = 0; i < order; ++i) {
      const double x = mid + half * gl.nodes[i];
      rule.nodes.push_back(x);
      rule.weights.push_back(gl.weights[i] * half * inv_sqrt_2pi * std::exp(-0.5 * x * x));
    }
  }
  return rule;
}

}  // namespace

const QuadratureRule& split_normal_rule(int order) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, order, make_split_normal);
}

}  // namespace rfasym
