#pragma once

#include <cmath>
#include <limits>

#include "rfasym/activations.hpp"
#include "rfasym/losses.hpp"
#include "rfasym/spectral.hpp"
#include "rfasym/teacher.hpp"

namespace rfasym {

struct SaddleTolerances {
  double cost = 1e-8;
  double param = 1e-6;
  double grad_h = 1e-5;        // central-difference step for the outer descent
  double t_rel_width = 1e-10;  // golden-section stop on the inner supremum
  double boundary_gap = 1e-9;  // relative threshold for beta^2 = q^2/T1
  double vartheta_tol = 1e-7;
  int max_qbeta_iterations = 4000;
  // Small-lambda continuation: solve on a decreasing lambda ladder,
  // warm-starting each stage.
  double continuation_start = 1e-1;
  double continuation_factor = 0.1;
};

struct SaddleConfig {
  LossSpec loss;
  TeacherSpec teacher;
  ActivationMoments moments;
  SpectralLaw law;
  double lambda = 1e-2;
  double eta = 1.0;
  EnvelopeQuadrature quad{};
  SaddleTolerances tol{};
  // warm start, e.g. from the neighbouring point of a sweep
  double init_q = 0.1;
  double init_beta = 0.5;
  double init_vartheta = 0.0;
};

struct InnerSup {
  double t = 0.0;  // +infinity at the cone boundary beta^2 = q^2/T1
  double value = 0.0;
  bool at_infinity = false;
};

struct SolverReport {
  int qbeta_iterations = 0;
  int vartheta_evaluations = 0;
  long envelope_evaluations = 0;
  double grad_norm = 0.0;
  double t_bracket_lo = 0.0;
  double t_bracket_hi = 0.0;
  bool boundary = false;
  int continuation_stages = 1;
  int envelope_order = 0;
};

struct SaddleSolution {
  double q_star = 0.0;
  double beta_star = 0.0;
  double vartheta_star = 0.0;
  double t_star = 0.0;
  double cost = 0.0;
  SolverReport report;

  bool t_at_infinity() const { return std::isinf(t_star); }
};

// The deterministic min-max problem: outer convex minimization over vartheta,
// joint strongly-convex minimization over (q, beta) on the cone
// beta >= |q|/sqrt(T1), strictly concave inner maximization over t > -theta.
class SaddleProblem {
 public:
  enum class EnvelopeMode {
    Quadrature,     // generic: tensor Gauss-Hermite expectation of the envelope
    ClosedSquared,  // squared loss: E[V^2] from label moments, no quadrature
  };

  explicit SaddleProblem(SaddleConfig cfg, EnvelopeMode mode = EnvelopeMode::Quadrature);

  const SaddleConfig& config() const { return cfg_; }
  const TConstants& constants() const { return tf_.constants(); }
  const TFunctions& t_functions() const { return tf_; }

  double objective(double vartheta, double q, double beta, double t) const;
  InnerSup inner_sup_t(double vartheta, double q, double beta) const;
  // same supremum with a caller-chosen golden-section width (the descent
  // loop runs with a loose width; value error is quadratic in it)
  InnerSup sup_over_t(double vartheta, double q, double beta, double width_tol) const;

  struct QBetaResult {
    double q = 0.0, beta = 0.0, value = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
  };
  QBetaResult solve_qbeta(double vartheta);

  SaddleSolution solve();

  // Euclidean projection onto {(q, beta): beta >= |q| / sqrt(T1), beta >= 0}.
  std::pair<double, double> project(double q, double beta) const;

 private:
  double envelope(double vartheta, double q, double beta, double x) const;
  double envelope_at_zero_scale(double vartheta, double q, double beta) const;
  double closed_second_moment(double vartheta, double q, double beta) const;
  void calibrate_envelope_order(double vartheta, double q, double beta, double x);
  QBetaResult descend_qbeta(double vartheta, double param_tol, double cost_tol);
  double vartheta_objective(double vartheta, double param_tol, double cost_tol);
  double stationary_vartheta(double v0, double q, double beta, double x) const;

  SaddleConfig cfg_;
  EnvelopeMode mode_;
  TFunctions tf_;
  double lambda_;  // current continuation stage
  LabelMoments labels_;
  int envelope_order_;
  // warm-start state
  double warm_q_ = 0.0, warm_beta_ = 0.5;
  mutable double warm_u_ = 0.0;
  mutable bool have_warm_t_ = false;
  mutable long envelope_evals_ = 0;
  mutable double last_t_lo_ = 0.0, last_t_hi_ = 0.0;
};

SaddleSolution solve_saddle(const SaddleConfig& cfg);

// Squared-loss specialization: the envelope expectation collapses to a
// quadratic in (vartheta, q, beta) through the label moments, and the optimal
// vartheta is E[Y]/mu0 (or 0 when mu0 = 0). Serves as an independent route
// against the generic quadrature path.
SaddleSolution solve_saddle_regression_closed(const SaddleConfig& cfg);

}  // namespace rfasym
