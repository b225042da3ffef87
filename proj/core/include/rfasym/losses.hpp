#pragma once

#include <string>

#include "rfasym/errors.hpp"

namespace rfasym {

enum class LossKind { Squared, Hinge, Lad, Logistic };
enum class Task { Regression, Classification };

// Convex scalar loss l(v) together with its task pairing:
//   regression:      l(y, z) = l(z - y)      (Squared: v^2/2)
//   classification:  l(y, z) = l(y z)        (Hinge: max(1-v,0), Lad: |1-v|,
//                                             Logistic: log(1+e^{-v}))
struct LossSpec {
  LossKind kind;
  Task task;

  static LossSpec squared() { return {LossKind::Squared, Task::Regression}; }
  static LossSpec hinge() { return {LossKind::Hinge, Task::Classification}; }
  static LossSpec lad() { return {LossKind::Lad, Task::Classification}; }
  static LossSpec logistic() { return {LossKind::Logistic, Task::Classification}; }
};

LossSpec loss_from_name(const std::string& name);
std::string loss_name(LossKind kind);

// l(v)
double base_eval(LossKind kind, double v);

// l'(v), almost everywhere (one-sided at the hinge/lad kinks)
double base_derivative(LossKind kind, double v);

// prox_{x l}(a) = argmin_z l(z) + (z - a)^2 / (2x). Closed form for Squared,
// Hinge and Lad; safeguarded Newton with bisection fallback for Logistic.
// Throws NonPositiveScale when x <= 0.
double prox(LossKind kind, double a, double x);

// Moreau envelope M_l(a; x) = min_z l(z) + (z - a)^2 / (2x).
double moreau(LossKind kind, double a, double x);

// l(y, z) with the task pairing above.
double loss_eval(const LossSpec& loss, double y, double z);

}  // namespace rfasym
