#include "rfasym/predict.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfasym/quadrature.hpp"

namespace rfasym {

Predictor predictor_from_name(const std::string& name) {
  if (name == "identity") return Predictor::Identity;
  if (name == "sign") return Predictor::Sign;
  throw ConfigError("unknown predictor: " + name);
}

std::string predictor_name(Predictor p) {
  return p == Predictor::Identity ? "identity" : "sign";
}

OverlapGaussian OverlapGaussian::from(double q, double beta, double vartheta, double rho,
                                      const ActivationMoments& m) {
  OverlapGaussian g;
  g.mean2 = m.mu0 * vartheta;
  g.var1 = rho * rho;
  g.cov = m.mu1 * rho * q;
  g.var2 = m.mu1 * m.mu1 * q * q + beta * beta;
  return g;
}

double training_error(const SaddleSolution& sol) { return sol.cost; }

namespace {

constexpr double kTail = 12.0;

double normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// E over nu2 | z1 of (c - phi_hat(nu2))^2 with nu2 = m2 + beta z2.
double inner_discrepancy(double c, double m2, double beta, Predictor phi_hat) {
  if (phi_hat == Predictor::Identity) {
    const double d = c - m2;
    return d * d + beta * beta;
  }
  // sign predictor: nu2 >= 0 with probability Phi(m2 / beta)
  double pplus;
  if (beta > 1e-300)
    pplus = normal_cdf(m2 / beta);
  else
    pplus = m2 >= 0.0 ? 1.0 : 0.0;
  const double dp = c - 1.0;
  const double dm = c + 1.0;
  return dp * dp * pplus + dm * dm * (1.0 - pplus);
}

}  // namespace

double gen_error_generic(double q, double beta, double vartheta, const TeacherSpec& teacher,
                         const ActivationMoments& m, Predictor phi_hat) {
  const OverlapGaussian g = OverlapGaussian::from(q, beta, vartheta, teacher.rho, m);
  if (!g.psd()) throw OutOfDomain("overlap covariance is not positive semidefinite");

  // nu1 = rho z1, nu2 = mu0 vartheta + mu1 q z1 + beta z2 reproduces the
  // overlap covariance exactly
  const double mean2 = g.mean2;
  const double slope = m.mu1 * q;

  auto outer = [&](double z1) {
    const double m2 = mean2 + slope * z1;
    if (teacher.kind == TeacherKind::SignFlip) {
      const double s1 = z1 >= 0.0 ? 1.0 : -1.0;
      const double p = teacher.flip_prob;
      return (1.0 - p) * inner_discrepancy(s1, m2, beta, phi_hat) +
             p * inner_discrepancy(-s1, m2, beta, phi_hat);
    }
    const double c = teacher_eval(teacher, teacher.rho * z1);
    return inner_discrepancy(c, m2, beta, phi_hat);
  };

  // split at the teacher kink so every piece is smooth
  std::vector<double> cuts = {-kTail, kTail};
  if (teacher.kind != TeacherKind::Identity) cuts.insert(cuts.begin() + 1, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    acc += integrate([&](double z1) { return outer(z1) * normal_pdf(z1); }, cuts[i], cuts[i + 1],
                     1e-12, 1e-15);
  const double scale = teacher.upsilon == 0 ? 1.0 : 0.25;
  return std::max(acc * scale, 0.0);
}

double gen_error_generic(const SaddleSolution& sol, const TeacherSpec& teacher,
                         const ActivationMoments& m, Predictor phi_hat) {
  return gen_error_generic(sol.q_star, sol.beta_star, sol.vartheta_star, teacher, m, phi_hat);
}

double gen_error_closed(double q, double beta, double vartheta, const TeacherSpec& teacher,
                        const ActivationMoments& m, Predictor phi_hat) {
  if (phi_hat == Predictor::Identity &&
      (teacher.kind == TeacherKind::Identity || teacher.kind == TeacherKind::Relu)) {
    // chi moments of the clean teacher function
    const double chi0 = teacher.kind == TeacherKind::Relu ? 0.3989422804014326779 : 0.0;
    const double chi1 = teacher.kind == TeacherKind::Relu ? 0.5 : 1.0;
    const double chi2 = teacher.kind == TeacherKind::Relu ? 0.5 : 1.0;
    const double rho = teacher.rho;
    return rho * rho * chi2 - 2.0 * m.mu1 * chi1 * rho * q + m.mu1 * m.mu1 * q * q + beta * beta -
           2.0 * rho * m.mu0 * chi0 * vartheta + m.mu0 * m.mu0 * vartheta * vartheta;
  }
  if (phi_hat == Predictor::Sign && teacher.kind == TeacherKind::SignFlip) {
    if (std::abs(m.mu0 * vartheta) > 1e-10)
      throw NoClosedForm("sign/sign closed form requires mu0 vartheta = 0");
    const double p = teacher.flip_prob;
    const double denom = std::sqrt(m.mu1 * m.mu1 * q * q + beta * beta);
    if (denom < 1e-300) return 0.5;
    const double r = std::clamp(m.mu1 * q / denom, -1.0, 1.0);
    return p + (1.0 - 2.0 * p) / M_PI * std::acos(r);
  }
  throw NoClosedForm("no closed-form generalization error for this teacher/predictor pair");
}

double gen_error_closed(const SaddleSolution& sol, const TeacherSpec& teacher,
                        const ActivationMoments& m, Predictor phi_hat) {
  return gen_error_closed(sol.q_star, sol.beta_star, sol.vartheta_star, teacher, m, phi_hat);
}

double gen_error(double q, double beta, double vartheta, const TeacherSpec& teacher,
                 const ActivationMoments& m, Predictor phi_hat) {
  try {
    return gen_error_closed(q, beta, vartheta, teacher, m, phi_hat);
  } catch (const NoClosedForm&) {
    return gen_error_generic(q, beta, vartheta, teacher, m, phi_hat);
  }
}

PredictionPair predict_errors(const SaddleSolution& sol, const TeacherSpec& teacher,
                              const ActivationMoments& m, Predictor phi_hat) {
  PredictionPair p;
  p.train_error = training_error(sol);
  p.gen_error = gen_error(sol.q_star, sol.beta_star, sol.vartheta_star, teacher, m, phi_hat);
  return p;
}

}  // namespace rfasym
