#include "rfasym/teacher.hpp"

#include <cmath>

#include "rfasym/quadrature.hpp"

namespace rfasym {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}

TeacherSpec TeacherSpec::identity(double rho, double noise) {
  if (!(rho > 0.0)) throw UnsupportedTeacher("teacher requires rho > 0");
  if (noise < 0.0) throw UnsupportedTeacher("teacher requires Delta >= 0");
  return {TeacherKind::Identity, rho, noise, 0.0, Task::Regression, 0};
}

TeacherSpec TeacherSpec::relu(double rho, double noise) {
  if (!(rho > 0.0)) throw UnsupportedTeacher("teacher requires rho > 0");
  if (noise < 0.0) throw UnsupportedTeacher("teacher requires Delta >= 0");
  return {TeacherKind::Relu, rho, noise, 0.0, Task::Regression, 0};
}

TeacherSpec TeacherSpec::sign_flip(double rho, double p) {
  if (!(rho > 0.0)) throw UnsupportedTeacher("teacher requires rho > 0");
  if (p < 0.0 || p > 0.5) throw UnsupportedTeacher("flip probability must lie in [0, 1/2]");
  return {TeacherKind::SignFlip, rho, 0.0, p, Task::Classification, 1};
}

TeacherKind teacher_from_name(const std::string& name) {
  if (name == "identity") return TeacherKind::Identity;
  if (name == "relu") return TeacherKind::Relu;
  if (name == "signflip" || name == "sign" || name == "sign_flip") return TeacherKind::SignFlip;
  throw ConfigError("unknown teacher: " + name);
}

std::string teacher_name(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::Identity:
      return "identity";
    case TeacherKind::Relu:
      return "relu";
    case TeacherKind::SignFlip:
      return "signflip";
  }
  return "?";
}

double teacher_eval(const TeacherSpec& t, double u) {
  switch (t.kind) {
    case TeacherKind::Identity:
      return u;
    case TeacherKind::Relu:
      return u > 0.0 ? u : 0.0;
    case TeacherKind::SignFlip:
      return u >= 0.0 ? 1.0 : -1.0;
  }
  return 0.0;
}

std::vector<double> sample_labels(const TeacherSpec& t, std::span<const double> projections,
                                  Rng& rng) {
  std::vector<double> y(projections.size());
  if (t.kind == TeacherKind::SignFlip) {
    for (std::size_t i = 0; i < projections.size(); ++i) {
      const double s = projections[i] >= 0.0 ? 1.0 : -1.0;
      y[i] = rng.bernoulli(t.flip_prob) ? -s : s;
    }
    return y;
  }
  for (std::size_t i = 0; i < projections.size(); ++i)
    y[i] = teacher_eval(t, projections[i]) + t.noise * rng.normal();
  return y;
}

GammaConstants gamma_constants(const TeacherSpec& t) {
  if (t.kind != TeacherKind::Relu)
    throw UnsupportedTeacher("gamma constants are defined for the ReLU teacher only");
  GammaConstants g;
  g.chi0 = kInvSqrt2Pi;  // E[max(z,0)]
  g.chi1 = 0.5;          // E[z max(z,0)]
  g.chi2 = 0.5;          // E[max(z,0)^2]
  g.gamma1 = t.rho * t.rho * g.chi2 + t.noise * t.noise;
  g.gamma2 = t.rho * g.chi1;
  g.gamma3 = t.rho * g.chi0;
  return g;
}

LabelMoments label_moments(const TeacherSpec& t) {
  switch (t.kind) {
    case TeacherKind::Identity:
      return {t.rho * t.rho + t.noise * t.noise, t.rho, 0.0};
    case TeacherKind::Relu:
      return {0.5 * t.rho * t.rho + t.noise * t.noise, 0.5 * t.rho, t.rho * kInvSqrt2Pi};
    case TeacherKind::SignFlip: {
      const double f = 1.0 - 2.0 * t.flip_prob;  // E[flip sign]
      return {1.0, f * std::sqrt(2.0 / M_PI), 0.0};
    }
  }
  return {0.0, 0.0, 0.0};
}

namespace {

// Tensor quadrature walk over the effective Gaussian coordinates of the
// scalar problem. Emits (weight, argument, scale, dcoef) per node, where the
// envelope expectation is sum weight * M(argument; x_scale-relative scale)
// and dcoef = d(argument)/d(mu0 vartheta) for the branch. The teacher
// function has a kink (or jump) at the origin for the relu and sign
// channels, so that axis uses a split-normal rule instead of Gauss-Hermite.
template <class Emit>
void envelope_visit(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                    double vartheta, double q, double beta, double x_scale, int order,
                    bool collapse, Emit&& emit) {
  const QuadratureRule& rule = gauss_hermite(order);
  const bool s_kink = t.kind != TeacherKind::Identity;
  const QuadratureRule& s_rule = s_kink ? split_normal_rule(order) : gauss_hermite(order);
  const int sn = static_cast<int>(s_rule.nodes.size());
  const int n = order;
  const double mean_shift = m.mu0 * vartheta;

  if (loss.task == Task::Regression) {
    if (t.kind == TeacherKind::SignFlip) {
      // binary labels through a regression-form loss; Delta = 0
      const double p = t.flip_prob;
      for (int i = 0; i < sn; ++i) {
        const double s = s_rule.nodes[i];
        const double base = mean_shift + m.mu1 * q * s;
        const double y0 = s >= 0.0 ? 1.0 : -1.0;
        for (int j = 0; j < n; ++j) {
          const double bh = beta * rule.nodes[j];
          const double w = s_rule.weights[i] * rule.weights[j];
          emit(w * (1.0 - p), bh + base - y0, x_scale, 1.0);
          emit(w * p, bh + base + y0, x_scale, 1.0);
        }
      }
      return;
    }
    if (collapse) {
      // beta H - Delta eps has the law of sqrt(beta^2 + Delta^2) H'
      const double s_eff = std::sqrt(beta * beta + t.noise * t.noise);
      for (int i = 0; i < sn; ++i) {
        const double s = s_rule.nodes[i];
        const double base = mean_shift + m.mu1 * q * s - teacher_eval(t, t.rho * s);
        for (int j = 0; j < n; ++j)
          emit(s_rule.weights[i] * rule.weights[j], s_eff * rule.nodes[j] + base, x_scale, 1.0);
      }
      return;
    }
    for (int i = 0; i < sn; ++i) {
      const double s = s_rule.nodes[i];
      const double base = mean_shift + m.mu1 * q * s - teacher_eval(t, t.rho * s);
      for (int j = 0; j < n; ++j) {
        const double bh = beta * rule.nodes[j];
        for (int l = 0; l < n; ++l)
          emit(s_rule.weights[i] * rule.weights[j] * rule.weights[l],
               bh + base - t.noise * rule.nodes[l], x_scale, 1.0);
      }
    }
    return;
  }

  // classification-form loss: V = Y (beta H + mu0 vartheta + mu1 q S), Z = Y^2
  if (t.kind == TeacherKind::SignFlip) {
    // conditional on S, sign(S) H has the law of H, so only the linear part
    // keeps the sign factor
    const double p = t.flip_prob;
    for (int i = 0; i < sn; ++i) {
      const double s = s_rule.nodes[i];
      const double sg = s >= 0.0 ? 1.0 : -1.0;
      const double g = sg * (mean_shift + m.mu1 * q * s);
      for (int j = 0; j < n; ++j) {
        const double bh = beta * rule.nodes[j];
        const double w = s_rule.weights[i] * rule.weights[j];
        emit(w * (1.0 - p), bh + g, x_scale, sg);
        emit(w * p, bh - g, x_scale, -sg);
      }
    }
    return;
  }
  // continuous labels through a classification-form loss (Y^2 scale varies)
  for (int i = 0; i < sn; ++i) {
    const double s = s_rule.nodes[i];
    const double lin = mean_shift + m.mu1 * q * s;
    const double phi = teacher_eval(t, t.rho * s);
    for (int l = 0; l < n; ++l) {
      const double y = phi + t.noise * rule.nodes[l];
      for (int j = 0; j < n; ++j)
        emit(s_rule.weights[i] * rule.weights[l] * rule.weights[j],
             y * (beta * rule.nodes[j] + lin), x_scale * y * y, y);
    }
  }
}

template <class Term>
double envelope_pass(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                     double vartheta, double q, double beta, double x_scale, int order,
                     bool collapse, Term&& term) {
  double acc = 0.0;
  envelope_visit(t, loss, m, vartheta, q, beta, x_scale, order, collapse,
                 [&](double w, double a, double x, double dcoef) { acc += w * term(a, x, dcoef); });
  return acc;
}

template <class Term>
double refined_pass(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                    double vartheta, double q, double beta, double x_scale,
                    const EnvelopeQuadrature& quad, Term&& term) {
  double val = envelope_pass(t, loss, m, vartheta, q, beta, x_scale, quad.order,
                             quad.collapse_gaussian_noise, term);
  if (!quad.refine) return val;
  for (int order = 2 * quad.order; order <= quad.max_order; order *= 2) {
    const double next = envelope_pass(t, loss, m, vartheta, q, beta, x_scale, order,
                                      quad.collapse_gaussian_noise, term);
    if (std::abs(next - val) <= quad.tol * std::max(1.0, std::abs(next))) return next;
    val = next;
  }
  return val;
}

}  // namespace

double expected_moreau(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                       double vartheta, double q, double beta, double x_scale,
                       const EnvelopeQuadrature& quad) {
  if (!(x_scale > 0.0)) throw NonPositiveScale("expected_moreau: x_scale must be positive");
  auto term = [&](double a, double x, double) {
    if (x < 1e-14) return base_eval(loss.kind, a);
    return moreau(loss.kind, a, x);
  };
  return refined_pass(t, loss, m, vartheta, q, beta, x_scale, quad, term);
}

double expected_loss(const TeacherSpec& t, const LossSpec& loss, const ActivationMoments& m,
                     double vartheta, double q, double beta, const EnvelopeQuadrature& quad) {
  auto term = [&](double a, double, double) { return base_eval(loss.kind, a); };
  return refined_pass(t, loss, m, vartheta, q, beta, 1.0, quad, term);
}

double expected_moreau_dvartheta(const TeacherSpec& t, const LossSpec& loss,
                                 const ActivationMoments& m, double vartheta, double q,
                                 double beta, double x_scale, const EnvelopeQuadrature& quad) {
  const double mu0 = m.mu0;
  if (x_scale == 0.0) {
    auto term = [&](double a, double, double dcoef) {
      return mu0 * dcoef * base_derivative(loss.kind, a);
    };
    return refined_pass(t, loss, m, vartheta, q, beta, 0.0, quad, term);
  }
  if (!(x_scale > 0.0))
    throw NonPositiveScale("expected_moreau_dvartheta: x_scale must be nonnegative");
  auto term = [&](double a, double x, double dcoef) {
    if (x < 1e-14) return mu0 * dcoef * base_derivative(loss.kind, a);
    return mu0 * dcoef * (a - prox(loss.kind, a, x)) / x;
  };
  return refined_pass(t, loss, m, vartheta, q, beta, x_scale, quad, term);
}

double EnvelopeSamples::moreau_at(LossKind kind, double x) const {
  if (zscale.empty()) {
    if (kind == LossKind::Squared) return second_moment() / (2.0 * (1.0 + x));
    double acc = 0.0;
    for (std::size_t i = 0; i < arg.size(); ++i) acc += weight[i] * moreau(kind, arg[i], x);
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < arg.size(); ++i) {
    const double xi = x * zscale[i];
    acc += weight[i] * (xi < 1e-14 ? base_eval(kind, arg[i]) : moreau(kind, arg[i], xi));
  }
  return acc;
}

double EnvelopeSamples::loss_at(LossKind kind) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < arg.size(); ++i) acc += weight[i] * base_eval(kind, arg[i]);
  return acc;
}

double EnvelopeSamples::second_moment() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < arg.size(); ++i) acc += weight[i] * arg[i] * arg[i];
  return acc;
}

EnvelopeSamples envelope_samples(const TeacherSpec& t, const LossSpec& loss,
                                 const ActivationMoments& m, double vartheta, double q,
                                 double beta, int order, bool collapse_gaussian_noise) {
  EnvelopeSamples samples;
  const bool unit_z = loss.task == Task::Regression || t.kind == TeacherKind::SignFlip;
  envelope_visit(t, loss, m, vartheta, q, beta, 1.0, order, collapse_gaussian_noise,
                 [&](double w, double a, double z, double) {
                   samples.weight.push_back(w);
                   samples.arg.push_back(a);
                   if (!unit_z) samples.zscale.push_back(z);
                 });
  return samples;
}

}  // namespace rfasym
