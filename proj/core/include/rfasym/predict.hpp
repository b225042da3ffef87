#pragma once

#include <string>

#include "rfasym/activations.hpp"
#include "rfasym/saddle.hpp"
#include "rfasym/teacher.hpp"

namespace rfasym {

enum class Predictor { Identity, Sign };

Predictor predictor_from_name(const std::string& name);
std::string predictor_name(Predictor p);

// Joint Gaussian law of (nu1, nu2) = (teacher projection, student output
// channel) determined by the overlaps: mean (0, mu0 vartheta), covariance
// [[rho^2, mu1 rho q], [mu1 rho q, mu1^2 q^2 + beta^2]].
struct OverlapGaussian {
  double mean2 = 0.0;
  double var1 = 0.0;
  double cov = 0.0;
  double var2 = 0.0;

  static OverlapGaussian from(double q, double beta, double vartheta, double rho,
                              const ActivationMoments& m);
  double det() const { return var1 * var2 - cov * cov; }
  bool psd(double tol = 1e-12) const { return var1 >= 0.0 && var2 >= 0.0 && det() >= -tol; }
};

struct PredictionPair {
  double train_error = 0.0;
  double gen_error = 0.0;
};

// The asymptotic training error is the optimal cost of the scalar min-max
// problem.
double training_error(const SaddleSolution& sol);

// E[(phi(nu1) - phi_hat(nu2))^2] / 4^upsilon under the overlap Gaussian.
// The nu2 integral is carried out in closed form (affine for the identity
// predictor, a Gaussian orthant weight for the sign predictor) and the nu1
// integral by piecewise-smooth quadrature against the normal density.
double gen_error_generic(double q, double beta, double vartheta, const TeacherSpec& teacher,
                         const ActivationMoments& m, Predictor phi_hat);
double gen_error_generic(const SaddleSolution& sol, const TeacherSpec& teacher,
                         const ActivationMoments& m, Predictor phi_hat);

// Closed forms: quadratic overlap expression for regression teachers with the
// identity predictor, arccos expression for the sign/sign pair when
// mu0 vartheta = 0. Throws NoClosedForm otherwise.
double gen_error_closed(double q, double beta, double vartheta, const TeacherSpec& teacher,
                        const ActivationMoments& m, Predictor phi_hat);
double gen_error_closed(const SaddleSolution& sol, const TeacherSpec& teacher,
                        const ActivationMoments& m, Predictor phi_hat);

// Closed form where available, generic quadrature otherwise.
double gen_error(double q, double beta, double vartheta, const TeacherSpec& teacher,
                 const ActivationMoments& m, Predictor phi_hat);

PredictionPair predict_errors(const SaddleSolution& sol, const TeacherSpec& teacher,
                              const ActivationMoments& m, Predictor phi_hat);

}  // namespace rfasym
