#include "rfasym/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rfasym {

LossSpec loss_from_name(const std::string& name) {
  if (name == "squared") return LossSpec::squared();
  if (name == "hinge") return LossSpec::hinge();
  if (name == "lad") return LossSpec::lad();
  if (name == "logistic") return LossSpec::logistic();
  throw ConfigError("unknown loss: " + name);
}

std::string loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::Squared:
      return "squared";
    case LossKind::Hinge:
      return "hinge";
    case LossKind::Lad:
      return "lad";
    case LossKind::Logistic:
      return "logistic";
  }
  return "?";
}

namespace {

// log(1 + e^{-v}) without overflow
double logistic_eval(double v) {
  if (v > 36.0) return std::exp(-v);
  if (v < -36.0) return -v;
  return std::log1p(std::exp(-v));
}

// 1 / (1 + e^v), stable for both signs
double neg_sigmoid(double v) {
  if (v >= 0.0) {
    const double e = std::exp(-v);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(v));
}

// Principal Lambert W for c >= 0: w e^w = c.
double lambert_w(double c) {
  if (c <= 0.0) return 0.0;
  double w = c < 3.0 ? c / (1.0 + c) : std::log(c) - std::log(std::max(std::log(c), 1.0));
  for (int i = 0; i < 4; ++i) {
    const double ew = std::exp(w);
    w -= (w * ew - c) / (ew * (1.0 + w) - 0.5 * (w + 2.0) * (w * ew - c) / (1.0 + w));
  }
  return w;
}

// Root of g(z) = z - a - x/(1+e^z); g is strictly increasing with
// g(a) < 0 < g(a + x), so [a, a+x] brackets the prox. Safeguarded Newton:
// a step is taken only if it stays in the bracket and keeps halving it,
// otherwise bisection guarantees progress.
double logistic_prox(double a, double x) {
  const double g_tol = 1e-14 * (1.0 + std::abs(a) + x);
  double lo = a;
  double hi = a + x * neg_sigmoid(a);  // s decreasing: a + x s(a) bounds the root
  // large-x asymptote: z - a = x e^{-z} / (1 + e^{-z}) ~ x e^{-z} when the
  // root sits in the flat tail, giving z ~ a + W(x e^{-a})
  double z = 0.5 * (lo + hi);
  if (x > 2.0 && a > -30.0) {
    const double w = a + lambert_w(x * std::exp(-a));
    if (w > lo && w < hi) z = w;
  } else if (hi - lo < 2.0) {
    z = hi;
  }
  double step_old = hi - lo;
  for (int iter = 0; iter < 200; ++iter) {
    const double s = neg_sigmoid(z);
    const double g = z - a - x * s;
    if (std::abs(g) < g_tol) return z;
    if (g > 0.0)
      hi = z;
    else
      lo = z;
    if (hi - lo < 4e-16 * (1.0 + std::abs(lo) + std::abs(hi))) return 0.5 * (lo + hi);
    const double gp = 1.0 + x * s * (1.0 - s);
    const double newton = z - g / gp;
    if (newton > lo && newton < hi && std::abs(2.0 * g) < std::abs(step_old * gp)) {
      step_old = std::abs(z - newton);
      z = newton;
    } else {
      step_old = 0.5 * (hi - lo);
      z = 0.5 * (lo + hi);
    }
  }
  throw NewtonDivergence("logistic prox did not converge");
}

}  // namespace

double base_eval(LossKind kind, double v) {
  switch (kind) {
    case LossKind::Squared:
      return 0.5 * v * v;
    case LossKind::Hinge:
      return std::max(1.0 - v, 0.0);
    case LossKind::Lad:
      return std::abs(1.0 - v);
    case LossKind::Logistic:
      return logistic_eval(v);
  }
  return 0.0;
}

double base_derivative(LossKind kind, double v) {
  switch (kind) {
    case LossKind::Squared:
      return v;
    case LossKind::Hinge:
      return v < 1.0 ? -1.0 : 0.0;
    case LossKind::Lad:
      return v < 1.0 ? -1.0 : (v > 1.0 ? 1.0 : 0.0);
    case LossKind::Logistic:
      return -neg_sigmoid(v);
  }
  return 0.0;
}

double prox(LossKind kind, double a, double x) {
  if (!(x > 0.0)) throw NonPositiveScale("prox: scale must be positive");
  switch (kind) {
    case LossKind::Squared:
      return a / (1.0 + x);
    case LossKind::Hinge:
      if (a >= 1.0) return a;
      if (a <= 1.0 - x) return a + x;
      return 1.0;
    case LossKind::Lad: {
      // soft threshold of a - 1 at level x, shifted back
      const double u = a - 1.0;
      if (u > x) return a - x;
      if (u < -x) return a + x;
      return 1.0;
    }
    case LossKind::Logistic:
      return logistic_prox(a, x);
  }
  return a;
}

double moreau(LossKind kind, double a, double x) {
  const double z = prox(kind, a, x);
  const double d = z - a;
  return base_eval(kind, z) + 0.5 * d * d / x;
}

double loss_eval(const LossSpec& loss, double y, double z) {
  if (loss.task == Task::Regression) return base_eval(loss.kind, z - y);
  return base_eval(loss.kind, y * z);
}

}  // namespace rfasym
