#include "rfasym/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace rfasym {

FeatureEnsemble FeatureEnsemble::gaussian(int n, int k) {
  if (n < 1 || k < 1) throw std::invalid_argument("feature ensemble requires n, k >= 1");
  return {EnsembleKind::GaussianIID, n, k, {}};
}

FeatureEnsemble FeatureEnsemble::orthogonal(int n, int k) {
  if (n < 1 || k < 1) throw std::invalid_argument("feature ensemble requires n, k >= 1");
  return {EnsembleKind::RandomOrthogonal, n, k, {}};
}

FeatureEnsemble FeatureEnsemble::from_file(std::string path) {
  return {EnsembleKind::FromFile, 0, 0, std::move(path)};
}

EnsembleKind ensemble_from_name(const std::string& name) {
  if (name == "gaussian") return EnsembleKind::GaussianIID;
  if (name == "orthogonal") return EnsembleKind::RandomOrthogonal;
  if (name == "file") return EnsembleKind::FromFile;
  throw ConfigError("unknown ensemble: " + name);
}

Eigen::MatrixXd sample_gaussian_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.normal();
  return x;
}

Eigen::VectorXd sample_teacher_vector(int n, double rho, Rng& rng) {
  Eigen::VectorXd xi(n);
  for (int i = 0; i < n; ++i) xi[i] = rng.normal();
  xi *= rho / xi.norm();
  return xi;
}

namespace {

// Haar-distributed orthonormal frame: thin QR of a Gaussian matrix with the
// R diagonal signs normalized to +1.
Eigen::MatrixXd haar_frame(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd g = sample_gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

Eigen::MatrixXd sample_features(const FeatureEnsemble& ensemble, Rng& rng) {
  switch (ensemble.kind) {
    case EnsembleKind::GaussianIID: {
      Eigen::MatrixXd f = sample_gaussian_matrix(ensemble.n, ensemble.k, rng);
      f /= std::sqrt(static_cast<double>(ensemble.n));
      return f;
    }
    case EnsembleKind::RandomOrthogonal: {
      const int n = ensemble.n, k = ensemble.k;
      const double delta = static_cast<double>(k) / n;
      const double d = std::max(std::sqrt(delta), 1.0);
      const int r = std::min(n, k);
      const Eigen::MatrixXd u = haar_frame(n, r, rng);
      const Eigen::MatrixXd v = haar_frame(k, r, rng);
      return d * u * v.transpose();
    }
    case EnsembleKind::FromFile:
      return load_feature_matrix(ensemble.path);
  }
  throw std::invalid_argument("unknown ensemble kind");
}

Eigen::MatrixXd build_design(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                             const Activation& act) {
  Eigen::MatrixXd x = A * F;
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = act(x(i, j));
  return x;
}

Eigen::MatrixXd build_gaussian_design(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A,
                                      const ActivationMoments& m, Rng& rng) {
  Eigen::MatrixXd x = m.mu1 * (A * F);
  const double mu_star = m.mu_star();
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) += m.mu0 + mu_star * rng.normal();
  return x;
}

double erm_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LossSpec& loss,
                     double lambda, const Eigen::VectorXd& w) {
  const Eigen::VectorXd z = X * w;
  double acc = 0.0;
  for (int i = 0; i < z.size(); ++i) acc += loss_eval(loss, y[i], z[i]);
  return acc / static_cast<double>(z.size()) + 0.5 * lambda * w.squaredNorm();
}

namespace {

ErmResult solve_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  const auto m = X.rows();
  const auto k = X.cols();
  ErmResult res;
  res.used_admm = false;
  if (k <= m) {
    // (X^T X / m + lambda I) w = X^T y / m
    Eigen::MatrixXd a = X.transpose() * X / static_cast<double>(m);
    a.diagonal().array() += lambda;
    res.w = Eigen::LLT<Eigen::MatrixXd>(a).solve(X.transpose() * y / static_cast<double>(m));
  } else {
    // dual form: w = X^T (X X^T + m lambda I)^{-1} y
    Eigen::MatrixXd a = X * X.transpose();
    a.diagonal().array() += lambda * static_cast<double>(m);
    res.w = X.transpose() * Eigen::LLT<Eigen::MatrixXd>(a).solve(y);
  }
  return res;
}

// ADMM on v = B w + c where B, c encode the loss channel:
//   regression:      B = X,          c = -y  (v is the residual)
//   classification:  B = diag(y) X,  c = 0   (v is the margin)
class AdmmWorkspace {
 public:
  AdmmWorkspace(const Eigen::MatrixXd& b, double lambda, double rho)
      : b_(b), lambda_(lambda), rho_(rho), use_dual_(b.cols() > b.rows()) {
    if (use_dual_) gram_ = b_ * b_.transpose();  // m x m
    else gram_ = b_.transpose() * b_;            // k x k
    factorize();
  }

  double rho() const { return rho_; }

  void set_rho(double rho) {
    rho_ = rho;
    factorize();
  }

  // solve (lambda I + rho B^T B) w = rhs
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (!use_dual_) return llt_.solve(rhs);
    // Woodbury: (lambda I + rho B^T B)^{-1} r = (r - rho B^T (lambda I + rho B B^T)^{-1} B r)/lambda
    const Eigen::VectorXd br = b_ * rhs;
    return (rhs - rho_ * (b_.transpose() * llt_.solve(br))) / lambda_;
  }

 private:
  void factorize() {
    Eigen::MatrixXd a = rho_ * gram_;
    a.diagonal().array() += lambda_;
    llt_.compute(a);
  }

  const Eigen::MatrixXd& b_;
  double lambda_;
  double rho_;
  bool use_dual_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

ErmResult solve_admm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LossSpec& loss,
                     double lambda, const ErmOptions& opts) {
  const auto m = X.rows();
  const auto k = X.cols();
  const double dm = static_cast<double>(m);

  Eigen::MatrixXd b;
  Eigen::VectorXd c;
  if (loss.task == Task::Regression) {
    b = X;
    c = -y;
  } else {
    b = y.asDiagonal() * X;
    c = Eigen::VectorXd::Zero(m);
  }

  double rho = opts.admm_rho;
  AdmmWorkspace ws(b, lambda, rho);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  if (opts.warm_start && opts.warm_start->size() == k) w = *opts.warm_start;
  Eigen::VectorXd v = b * w + c;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);

  ErmResult res;
  res.used_admm = true;
  double best_resid = 1e300;
  int best_iter = 0;

  const double sqrt_m = std::sqrt(dm);
  const double sqrt_k = std::sqrt(static_cast<double>(k));

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    // w-update: min lambda/2 ||w||^2 + rho/2 ||B w + c - v + u||^2
    w = ws.solve(rho * (b.transpose() * (v - u - c)));
    const Eigen::VectorXd bw_c = b * w + c;

    // v-update: scalar prox at scale 1/(m rho)
    const Eigen::VectorXd t = bw_c + u;
    const Eigen::VectorXd v_old = v;
    const double prox_scale = 1.0 / (dm * rho);
    for (int i = 0; i < m; ++i) v[i] = prox(loss.kind, t[i], prox_scale);

    u += bw_c - v;

    const double r_primal = (bw_c - v).norm() / sqrt_m;
    const double r_dual = rho * (b.transpose() * (v - v_old)).norm() / sqrt_k;
    res.primal_residual = r_primal;
    res.dual_residual = r_dual;
    res.iterations = iter;

    if (r_primal < opts.tol && r_dual < opts.tol) {
      res.w = w;
      return res;
    }

    const double resid = std::max(r_primal, r_dual);
    if (resid < best_resid * 0.5) {
      best_resid = resid;
      best_iter = iter;
    }
    // stall: no halving of the worst residual for a long stretch
    if (iter - best_iter > 1500 && resid > opts.stall_tol) {
      res.stalled = true;
      break;
    }

    // residual balancing, checked sparingly to limit refactorizations
    if (iter % 50 == 0 && iter < 8000) {
      if (r_primal > 10.0 * r_dual) {
        rho *= 2.0;
        u *= 0.5;
        ws.set_rho(rho);
      } else if (r_dual > 10.0 * r_primal) {
        rho *= 0.5;
        u *= 2.0;
        ws.set_rho(rho);
      }
    }
  }
  if (res.iterations >= opts.max_iterations &&
      (res.primal_residual > opts.stall_tol || res.dual_residual > opts.stall_tol))
    res.stalled = true;
  res.w = w;
  return res;
}

}  // namespace

ErmResult solve_erm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LossSpec& loss,
                    double lambda, const ErmOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_erm: lambda must be positive");
  if (loss.kind == LossKind::Squared && !opts.force_admm) return solve_ridge(X, y, lambda);
  return solve_admm(X, y, loss, lambda, opts);
}

Overlaps measure(const Eigen::MatrixXd& F, const Eigen::VectorXd& xi, const Eigen::VectorXd& w,
                 const ActivationMoments& m) {
  const double norm_xi = xi.norm();
  if (!(norm_xi > 0.0)) throw std::invalid_argument("measure: xi must be nonzero");
  const Eigen::VectorXd g = F * w;
  const double q = xi.dot(g) / norm_xi;
  // w^T M w with M = mu1^2 F^T P_perp F + mu_star^2 I, using
  // g^T P_perp g = ||g||^2 - (xi_bar^T g)^2
  const double beta_sq =
      m.mu1 * m.mu1 * (g.squaredNorm() - q * q) + m.mu_star_sq * w.squaredNorm();
  Overlaps o;
  o.q = q;
  o.beta = std::sqrt(std::max(beta_sq, 0.0));
  o.vartheta = w.sum();
  return o;
}

EmpiricalErrors empirical_errors(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LossSpec& loss, double lambda, const Eigen::VectorXd& w,
                                 const Eigen::MatrixXd& F, const Eigen::VectorXd& xi,
                                 const TeacherSpec& teacher, const ActivationMoments& m,
                                 const Activation& act, Predictor phi_hat, GenErrorMode mode,
                                 int fresh_samples, bool gaussian_channel, Rng& rng) {
  EmpiricalErrors out;
  out.train = erm_objective(X, y, loss, lambda, w);

  if (mode == GenErrorMode::ClosedFormOverlap) {
    const Overlaps o = measure(F, xi, w, m);
    out.gen = gen_error(o.q, o.beta, o.vartheta, teacher, m, phi_hat);
    return out;
  }

  const int n = static_cast<int>(F.rows());
  const double mu_star = m.mu_star();
  const double w_norm = w.norm();
  const double mean_shift = m.mu0 * w.sum();
  const double scale = teacher.upsilon == 0 ? 1.0 : 0.25;

  double acc = 0.0, acc2 = 0.0;
  const int batch = 512;
  Eigen::MatrixXd a(batch, n);
  int done = 0;
  while (done < fresh_samples) {
    const int b = std::min(batch, fresh_samples - done);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    const Eigen::VectorXd nu1 = a.topRows(b) * xi;
    Eigen::VectorXd nu2(b);
    if (gaussian_channel) {
      const Eigen::VectorXd lin = a.topRows(b) * (F * w);
      for (int i = 0; i < b; ++i)
        nu2[i] = mean_shift + m.mu1 * lin[i] + mu_star * w_norm * rng.normal();
    } else {
      Eigen::MatrixXd h = a.topRows(b) * F;
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < h.cols(); ++j) h(i, j) = act(h(i, j));
      nu2 = h * w;
    }
    for (int i = 0; i < b; ++i) {
      double target;
      if (teacher.kind == TeacherKind::SignFlip) {
        const double s = nu1[i] >= 0.0 ? 1.0 : -1.0;
        target = rng.bernoulli(teacher.flip_prob) ? -s : s;
      } else {
        target = teacher_eval(teacher, nu1[i]);
      }
      const double pred = phi_hat == Predictor::Identity ? nu2[i] : (nu2[i] >= 0.0 ? 1.0 : -1.0);
      const double d = (target - pred) * (target - pred) * scale;
      acc += d;
      acc2 += d * d;
    }
    done += b;
  }
  const double nn = static_cast<double>(fresh_samples);
  out.gen = acc / nn;
  const double var = std::max(acc2 / nn - out.gen * out.gen, 0.0);
  out.gen_se = std::sqrt(var / nn);
  return out;
}

double GetCheckReport::max_abs_z() const {
  return std::max({std::abs(z_mean1), std::abs(z_mean2), std::abs(z_var1), std::abs(z_var2),
                   std::abs(z_cov)});
}

GetCheckReport get_check(const Eigen::MatrixXd& F, const Eigen::VectorXd& xi,
                         const Eigen::VectorXd& w, const Activation& act,
                         const ActivationMoments& m, int n_samples, Rng& rng) {
  const int n = static_cast<int>(F.rows());
  std::vector<double> nu1(n_samples), nu2(n_samples);

  const int batch = 512;
  Eigen::MatrixXd a(batch, n);
  int done = 0;
  while (done < n_samples) {
    const int b = std::min(batch, n_samples - done);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    const Eigen::VectorXd v1 = a.topRows(b) * xi;
    Eigen::MatrixXd h = a.topRows(b) * F;
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < h.cols(); ++j) h(i, j) = act(h(i, j));
    const Eigen::VectorXd v2 = h * w;
    for (int i = 0; i < b; ++i) {
      nu1[done + i] = v1[i];
      nu2[done + i] = v2[i];
    }
    done += b;
  }

  const double nn = static_cast<double>(n_samples);
  GetCheckReport rep;
  for (int i = 0; i < n_samples; ++i) {
    rep.mean1 += nu1[i];
    rep.mean2 += nu2[i];
  }
  rep.mean1 /= nn;
  rep.mean2 /= nn;

  double s11 = 0.0, s22 = 0.0, s12 = 0.0;
  double q11 = 0.0, q22 = 0.0, q12 = 0.0;  // fourth-moment accumulators
  for (int i = 0; i < n_samples; ++i) {
    const double d1 = nu1[i] - rep.mean1;
    const double d2 = nu2[i] - rep.mean2;
    s11 += d1 * d1;
    s22 += d2 * d2;
    s12 += d1 * d2;
    q11 += d1 * d1 * d1 * d1;
    q22 += d2 * d2 * d2 * d2;
    q12 += d1 * d2 * d1 * d2;
  }
  rep.var1 = s11 / nn;
  rep.var2 = s22 / nn;
  rep.cov = s12 / nn;

  rep.target_mean1 = 0.0;
  rep.target_mean2 = m.mu0 * w.sum();
  rep.target_var1 = xi.squaredNorm();
  rep.target_cov = m.mu1 * xi.dot(F * w);
  rep.target_var2 = m.mu1 * m.mu1 * (F * w).squaredNorm() + m.mu_star_sq * w.squaredNorm();

  const double se_mean1 = std::sqrt(rep.var1 / nn);
  const double se_mean2 = std::sqrt(rep.var2 / nn);
  const double se_var1 = std::sqrt(std::max(q11 / nn - rep.var1 * rep.var1, 0.0) / nn);
  const double se_var2 = std::sqrt(std::max(q22 / nn - rep.var2 * rep.var2, 0.0) / nn);
  const double se_cov = std::sqrt(std::max(q12 / nn - rep.cov * rep.cov, 0.0) / nn);

  rep.z_mean1 = (rep.mean1 - rep.target_mean1) / se_mean1;
  rep.z_mean2 = (rep.mean2 - rep.target_mean2) / se_mean2;
  rep.z_var1 = (rep.var1 - rep.target_var1) / se_var1;
  rep.z_var2 = (rep.var2 - rep.target_var2) / se_var2;
  rep.z_cov = (rep.cov - rep.target_cov) / se_cov;
  return rep;
}

namespace {
constexpr char kMatrixMagic[8] = {'R', 'F', 'M', 'X', '0', '0', '0', '1'};
}

void save_feature_matrix(const std::string& path, const Eigen::MatrixXd& F) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open feature matrix file for writing: " + path);
  out.write(kMatrixMagic, sizeof(kMatrixMagic));
  const std::uint64_t n = static_cast<std::uint64_t>(F.rows());
  const std::uint64_t k = static_cast<std::uint64_t>(F.cols());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&k), sizeof(k));
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
      const double v = F(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!out) throw IoError("failed writing feature matrix: " + path);
}

Eigen::MatrixXd load_feature_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature matrix file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0)
    throw IoError("bad feature matrix header: " + path);
  std::uint64_t n = 0, k = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&k), sizeof(k));
  if (!in || n == 0 || k == 0 || n > (1u << 24) || k > (1u << 24))
    throw IoError("bad feature matrix dimensions: " + path);
  Eigen::MatrixXd f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < k; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!in) throw IoError("truncated feature matrix: " + path);
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return f;
}

}  // namespace rfasym
