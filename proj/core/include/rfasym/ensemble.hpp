#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

#include "rfasym/activations.hpp"
#include "rfasym/losses.hpp"
#include "rfasym/predict.hpp"
#include "rfasym/rng.hpp"
#include "rfasym/teacher.hpp"

namespace rfasym {

enum class EnsembleKind { GaussianIID, RandomOrthogonal, FromFile };

struct FeatureEnsemble {
  EnsembleKind kind = EnsembleKind::GaussianIID;
  int n = 0;
  int k = 0;
  std::string path;  // FromFile

  static FeatureEnsemble gaussian(int n, int k);
  static FeatureEnsemble orthogonal(int n, int k);
  static FeatureEnsemble from_file(std::string path);
};

EnsembleKind ensemble_from_name(const std::string& name);

// n x k feature matrix. GaussianIID draws entries iid N(0, 1/n); the
// orthogonal ensemble has all singular values equal to max(sqrt(k/n), 1),
// built from Haar frames (QR of Gaussian matrices with the R diagonal signs
// normalized to +1).
Eigen::MatrixXd sample_features(const FeatureEnsemble& ensemble, Rng& rng);

// Rows s(F^T a_i) for the data matrix A (m x n).
Eigen::MatrixXd build_design(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                             const Activation& act);

// Rows mu0 1^T + mu1 (F^T a_i)^T + mu_star z_i^T with fresh iid normal z_i.
Eigen::MatrixXd build_gaussian_design(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                      const ActivationMoments& m, Rng& rng);

struct ErmOptions {
  double admm_rho = 1.0;       // initial penalty; residual balancing adapts it
  double tol = 1e-8;           // primal/dual RMS residual target
  int max_iterations = 10000;
  double stall_tol = 1e-6;     // plateau above this reports a stall
  bool force_admm = false;     // route the squared loss through ADMM (tests)
  const Eigen::VectorXd* warm_start = nullptr;
};

struct ErmResult {
  Eigen::VectorXd w;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool used_admm = false;
  bool stalled = false;
};

// argmin_w (1/m) sum_i l(y_i, x_i^T w) + (lambda/2) ||w||^2. The squared
// loss is solved exactly through whichever normal-equation system (k x k or
// m x m) is smaller; other losses run ADMM on the margin splitting
// v = diag(y) X w with the scalar prox per coordinate.
ErmResult solve_erm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LossSpec& loss,
                    double lambda, const ErmOptions& opts = {});

double erm_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LossSpec& loss,
                     double lambda, const Eigen::VectorXd& w);

// Empirical overlaps of a trained weight vector:
//   q = (xi/rho)^T F w,
//   beta = sqrt(w^T M w) with M = mu1^2 F^T P_perp F + mu_star^2 I,
//   vartheta = 1^T w.
struct Overlaps {
  double q = 0.0;
  double beta = 0.0;
  double vartheta = 0.0;
};
Overlaps measure(const Eigen::MatrixXd& F, const Eigen::VectorXd& xi, const Eigen::VectorXd& w,
                 const ActivationMoments& m);

enum class GenErrorMode { ClosedFormOverlap, FreshSamples };

struct EmpiricalErrors {
  double train = 0.0;
  double gen = 0.0;
  double gen_se = 0.0;  // Monte Carlo standard error (FreshSamples only)
};

// Training error is the ERM objective at w; generalization error either by
// plugging the measured overlaps into the asymptotic error map or by fresh
// Monte Carlo samples through the prediction channel. gaussian_channel
// selects the surrogate output channel mu0 1^T w + mu1 w^T F^T a + mu_star
// w^T z for solutions of the Gaussian formulation.
EmpiricalErrors empirical_errors(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LossSpec& loss, double lambda, const Eigen::VectorXd& w,
                                 const Eigen::MatrixXd& F, const Eigen::VectorXd& xi,
                                 const TeacherSpec& teacher, const ActivationMoments& m,
                                 const Activation& act, Predictor phi_hat, GenErrorMode mode,
                                 int fresh_samples, bool gaussian_channel, Rng& rng);

// First/second-moment comparison of (nu1, nu2) = (xi^T a, w^T s(F^T a))
// against the Gaussian-equivalence prediction, over fresh draws of a.
struct GetCheckReport {
  double mean1 = 0.0, mean2 = 0.0;
  double var1 = 0.0, var2 = 0.0, cov = 0.0;
  double target_mean1 = 0.0, target_mean2 = 0.0;
  double target_var1 = 0.0, target_var2 = 0.0, target_cov = 0.0;
  double z_mean1 = 0.0, z_mean2 = 0.0, z_var1 = 0.0, z_var2 = 0.0, z_cov = 0.0;
  double max_abs_z() const;
};
GetCheckReport get_check(const Eigen::MatrixXd& F, const Eigen::VectorXd& xi,
                         const Eigen::VectorXd& w, const Activation& act,
                         const ActivationMoments& m, int n_samples, Rng& rng);

// Dense row-major binary format with an (n, k) header; round-trips bit-exactly.
void save_feature_matrix(const std::string& path, const Eigen::MatrixXd& F);
Eigen::MatrixXd load_feature_matrix(const std::string& path);

// xi uniform on the sphere of radius rho.
Eigen::VectorXd sample_teacher_vector(int n, double rho, Rng& rng);

Eigen::MatrixXd sample_gaussian_matrix(int rows, int cols, Rng& rng);

}  // namespace rfasym
