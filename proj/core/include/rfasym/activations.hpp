#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfasym/errors.hpp"

namespace rfasym {

enum class ActivationKind {
  ReLU,
  SoftPlus,
  Tanh,
  Erf,
  Sign,
  BinaryStep,
  Identity,
  Custom,
};

// Scalar activation applied elementwise to the hidden-layer pre-activations.
// Sign(0) = +1 and BinaryStep(0) = 1.
class Activation {
 public:
  static Activation relu();
  static Activation softplus();
  static Activation tanh();
  static Activation erf();
  static Activation sign();
  static Activation binary_step();
  static Activation identity();
  static Activation custom(std::function<double(double)> fn, bool odd = false,
                           std::string name = "custom");

  double operator()(double x) const;
  ActivationKind kind() const { return kind_; }
  bool is_odd() const { return odd_; }
  const std::string& name() const { return name_; }

  // Points where the function is non-smooth; drives split quadrature in
  // moments(). Empty for smooth variants and Custom.
  const std::vector<double>& kinks() const { return kinks_; }

 private:
  Activation(ActivationKind kind, bool odd, std::string name, std::vector<double> kinks);

  ActivationKind kind_;
  bool odd_;
  std::string name_;
  std::vector<double> kinks_;
  std::function<double(double)> fn_;  // Custom only
};

Activation activation_from_name(const std::string& name);

// Gaussian moments of an activation: mu0 = E[s(z)], mu1 = E[z s(z)],
// mu_star_sq = E[s(z)^2] - mu0^2 - mu1^2, with z ~ N(0,1).
struct ActivationMoments {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu_star_sq = 0.0;

  double mu_star() const;
  double second_moment() const { return mu0 * mu0 + mu1 * mu1 + mu_star_sq; }
  bool mean_zero() const { return std::abs(mu0) < 1e-12; }
};

// Computes moments by Gauss-Hermite quadrature against the standard normal
// (split at kinks for the piecewise variants). Throws NonPositiveMu1 when
// E[z s(z)] <= 0 and DivergentMoment when E[s(z)^2] fails to stabilize
// across two quadrature orders.
ActivationMoments moments(const Activation& act, int quad_order = 64);

}  // namespace rfasym
