#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "rfasym/errors.hpp"

namespace rfasym {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Probabilists' Gauss-Hermite rule normalized for expectations against
// N(0,1): weights sum to 1. Rules are cached per order; thread-safe.
const QuadratureRule& gauss_hermite(int order);

// Gauss-Legendre rule on [-1,1]; weights sum to 2. Cached, thread-safe.
const QuadratureRule& gauss_legendre(int order);

// Composite Gauss-Legendre panels against the normal density, split at zero,
// for expectations of functions with a kink or jump at the origin. order is
// the node count per half-line.
const QuadratureRule& split_normal_rule(int order);

namespace detail {

template <class F>
double gl_panel(F&& f, double lo, double hi, const QuadratureRule& rule) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

template <class F>
double adaptive_gl(F&& f, double lo, double hi, double whole, double rel_tol,
                   double abs_per_unit, int depth, const QuadratureRule& rule) {
  const double mid = 0.5 * (lo + hi);
  const double left = gl_panel(f, lo, mid, rule);
  const double right = gl_panel(f, mid, hi, rule);
  const double err = std::abs(left + right - whole);
  if (err <= rel_tol * std::abs(left + right) + abs_per_unit * (hi - lo)) return left + right;
  if (depth <= 0) throw QuadratureFailure("adaptive quadrature did not converge");
  return adaptive_gl(f, lo, mid, left, rel_tol, abs_per_unit, depth - 1, rule) +
         adaptive_gl(f, mid, hi, right, rel_tol, abs_per_unit, depth - 1, rule);
}

}  // namespace detail

// Adaptive Gauss-Legendre integration of f over [lo, hi]. The absolute
// tolerance is distributed per unit length so that near-zero panels can
// terminate.
template <class F>
double integrate(F&& f, double lo, double hi, double rel_tol = 1e-11, double abs_tol = 1e-14) {
  if (!(hi > lo)) return 0.0;
  const QuadratureRule& rule = gauss_legendre(15);
  const double whole = detail::gl_panel(f, lo, hi, rule);
  return detail::adaptive_gl(f, lo, hi, whole, rel_tol, abs_tol / (hi - lo), 64, rule);
}

// E[f(Z)] for Z ~ N(0,1) via Gauss-Hermite at the given order.
template <class F>
double gauss_expectation(F&& f, int order) {
  const QuadratureRule& rule = gauss_hermite(order);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

}  // namespace rfasym
