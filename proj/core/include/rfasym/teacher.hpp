#pragma once

#include <span>
#include <string>
#include <vector>

#include "rfasym/activations.hpp"
#include "rfasym/errors.hpp"
#include "rfasym/losses.hpp"
#include "rfasym/rng.hpp"

namespace rfasym {

enum class TeacherKind { Identity, Relu, SignFlip };

// Label channel y = phi(a^T xi) + Delta eps, with ||xi|| = rho. SignFlip is
// the binary teacher y = +-sign(a^T xi), flipped with probability p.
struct TeacherSpec {
  TeacherKind kind = TeacherKind::Identity;
  double rho = 1.0;
  double noise = 0.0;      // Delta
  double flip_prob = 0.0;  // p, SignFlip only
  Task task = Task::Regression;
  int upsilon = 0;  // 0 regression, 1 binary classification

  static TeacherSpec identity(double rho, double noise = 0.0);
  static TeacherSpec relu(double rho, double noise = 0.0);
  static TeacherSpec sign_flip(double rho, double p = 0.0);
};

TeacherKind teacher_from_name(const std::string& name);
std::string teacher_name(TeacherKind kind);

// Deterministic part phi(u). For SignFlip this is the unflipped sign.
double teacher_eval(const TeacherSpec& t, double u);

std::vector<double> sample_labels(const TeacherSpec& t, std::span<const double> projections,
                                  Rng& rng);

// gamma1 = E[Y^2], gamma2 = E[Y S], gamma3 = E[Y] together with the Gaussian
// half-moments chi of the ReLU teacher. Only defined for the ReLU teacher.
struct GammaConstants {
  double gamma1, gamma2, gamma3;
  double chi0, chi1, chi2;
};
GammaConstants gamma_constants(const TeacherSpec& t);

// (E[Y^2], E[Y S], E[Y]) for every built-in teacher; S is the normalized
// projection a^T xi / rho.
struct LabelMoments {
  double y2, ys, y;
};
LabelMoments label_moments(const TeacherSpec& t);

struct EnvelopeQuadrature {
  int order = 48;       // Gauss-Hermite nodes per dimension
  bool refine = true;   // double the order until stable
  double tol = 1e-9;
  int max_order = 768;
  // Fold beta H - Delta eps into a single Gaussian for regression-form
  // losses; the 3-D path exists as an independent route for testing.
  bool collapse_gaussian_noise = true;
};

// E[ M_l( V(vartheta, q, beta); x_scale * Z ) ] where, for regression-form
// losses, V = beta H + mu0 vartheta + mu1 q S - Y and Z = 1, and for
// classification-form losses, V = Y (beta H + mu0 vartheta + mu1 q S) and
// Z = Y^2, with Y = phi(rho S) + Delta eps.
double expected_moreau(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                       double vartheta, double q, double beta, double x_scale,
                       const EnvelopeQuadrature& quad = {});

// The x_scale -> 0+ limit of expected_moreau: E[ l(V) ].
double expected_loss(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                     double vartheta, double q, double beta,
                     const EnvelopeQuadrature& quad = {});

// d/dvartheta of expected_moreau (of expected_loss when x_scale = 0), via the
// envelope derivative M'(a; x) = (a - prox(a; x)) / x. Strictly increasing in
// vartheta; its root pins the optimal vartheta at fixed (q, beta, x).
double expected_moreau_dvartheta(const TeacherSpec& t, const LossSpec& loss,
                                 const ActivationMoments& m, double vartheta, double q,
                                 double beta, double x_scale,
                                 const EnvelopeQuadrature& quad = {});

// Discretized joint law of (V, Z) at fixed (vartheta, q, beta): the envelope
// expectation becomes sum_i weight_i M(arg_i; x zscale_i) for any scale x,
// letting an inner maximization over the scale reuse one quadrature pass.
struct EnvelopeSamples {
  std::vector<double> arg;
  std::vector<double> weight;
  std::vector<double> zscale;  // empty when Z = 1 throughout

  double moreau_at(LossKind kind, double x) const;
  double loss_at(LossKind kind) const;  // the x -> 0 limit
  double second_moment() const;         // E[V^2] (closed envelope of the squared loss)
};

EnvelopeSamples envelope_samples(const TeacherSpec& t, const LossSpec& loss,
                                 const ActivationMoments& m, double vartheta, double q,
                                 double beta, int order,
                                 bool collapse_gaussian_noise = true);

}  // namespace rfasym
