#include "rfasym/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace rfasym {

std::pair<double, double> mp_support(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("mp_support: delta must be positive");
  const double s = std::sqrt(delta);
  return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

double mp_density(double delta, double kappa) {
  const auto [a, b] = mp_support(delta);
  if (kappa <= a || kappa >= b) return 0.0;
  const double e = std::min(delta, 1.0);
  return std::sqrt((kappa - a) * (b - kappa)) / (2.0 * M_PI * e * kappa);
}

SpectralLaw::SpectralLaw(LawKind kind, double delta, double kmin, double kmax,
                         std::vector<double> eigs)
    : kind_(kind), delta_(delta), kappa_min_(kmin), kappa_max_(kmax), eigs_(std::move(eigs)) {
  if (!(delta_ > 0.0)) throw DegenerateLaw("spectral law requires delta > 0");
  if (!(kappa_min_ >= 0.0) || !(kappa_max_ >= kappa_min_) || !std::isfinite(kappa_max_))
    throw DegenerateLaw("spectral law support must satisfy 0 <= kappa_min <= kappa_max < inf");
}

SpectralLaw SpectralLaw::point_mass(double kappa0, double delta) {
  if (!(kappa0 > 0.0)) throw DegenerateLaw("point mass requires kappa0 > 0");
  return SpectralLaw(LawKind::PointMass, delta, kappa0, kappa0, {});
}

SpectralLaw SpectralLaw::marchenko_pastur(double delta) {
  const auto [a, b] = mp_support(delta);
  return SpectralLaw(LawKind::MarchenkoPastur, delta, a, b, {});
}

SpectralLaw SpectralLaw::empirical(std::vector<double> eigenvalues, double delta) {
  if (eigenvalues.empty()) throw DegenerateLaw("empirical law requires at least one eigenvalue");
  if (!std::is_sorted(eigenvalues.begin(), eigenvalues.end()))
    throw DegenerateLaw("empirical eigenvalues must be ascending");
  if (!(eigenvalues.front() > 0.0))
    throw DegenerateLaw("empirical eigenvalues must be positive");
  const double kmin = eigenvalues.front();
  const double kmax = eigenvalues.back();
  return SpectralLaw(LawKind::Empirical, delta, kmin, kmax, std::move(eigenvalues));
}

SpectralLaw SpectralLaw::orthogonal(double delta) {
  return point_mass(std::max(delta, 1.0), delta);
}

std::vector<double> load_eigenvalues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open eigenvalue file: " + path);
  std::vector<double> eigs;
  double x;
  while (in >> x) {
    if (!(x > 0.0)) throw IoError("eigenvalue file contains non-positive entry: " + path);
    if (!eigs.empty() && x < eigs.back())
      throw IoError("eigenvalue file must be ascending: " + path);
    eigs.push_back(x);
  }
  if (eigs.empty()) throw IoError("eigenvalue file is empty: " + path);
  return eigs;
}

namespace {

struct BaseMoments {
  double a0;     // E[k / (mu*^2 + mu1^2 k)]
  double a1;     // E[k / (mu*^2 + mu1^2 k)^2]
  double b0;     // E[1 / (mu*^2 + mu1^2 k)]
  double denom;  // 1 - e + e mu*^2 b0
};

BaseMoments base_moments(const SpectralLaw& law, const ActivationMoments& m) {
  const double ms = m.mu_star_sq;
  const double m1 = m.mu1 * m.mu1;
  BaseMoments b;
  b.a0 = law.expect_fn([&](double k) { return k / (ms + m1 * k); });
  b.a1 = law.expect_fn([&](double k) { const double d = ms + m1 * k; return k / (d * d); });
  b.b0 = law.expect_fn([&](double k) { return 1.0 / (ms + m1 * k); });
  b.denom = 1.0 - law.e() + law.e() * ms * b.b0;
  return b;
}

void check_t_domain(double t, double theta) {
  if (t <= -theta + 1e-12) throw OutOfDomain("t must satisfy t > -theta");
}

}  // namespace

TConstants t_constants(const SpectralLaw& law, const ActivationMoments& m) {
  const BaseMoments b = base_moments(law, m);
  if (b.denom <= 1e-14) throw DegenerateLaw("degenerate T1 denominator (mu_star^2 ~ 0)");
  TConstants tc;
  tc.t1 = law.e() * b.a0 / b.denom;
  tc.t2 = b.a1 / (b.denom * b.a0);
  tc.theta = 1.0 / (m.mu1 * m.mu1 * law.kappa_max() + m.mu_star_sq);
  if (!(tc.t1 > 0.0)) throw DegenerateLaw("T1 must be positive");
  return tc;
}

namespace {

// 1 + t (mu*^2 + mu1^2 k) rewritten as theta mu1^2 (kappa_max - k)
// + (t + theta)(mu*^2 + mu1^2 k); the right-hand form stays accurate as
// t approaches -theta, where the direct form cancels catastrophically.
struct ShiftedDenom {
  double theta, ms, m1, kmax, eps;
  ShiftedDenom(double theta_, double ms_, double m1_, double kmax_, double t)
      : theta(theta_), ms(ms_), m1(m1_), kmax(kmax_), eps(t + theta_) {}
  double operator()(double k, double upper_gap) const {
    return theta * m1 * upper_gap + eps * (ms + m1 * k);
  }
  double at_mustar() const { return theta * m1 * kmax + eps * ms; }  // 1 + t mu*^2
};

}  // namespace

double t3(const SpectralLaw& law, const ActivationMoments& m, double t) {
  const TConstants tc = t_constants(law, m);
  check_t_domain(t, tc.theta);
  const double ms = m.mu_star_sq;
  const double m1 = m.mu1 * m.mu1;
  const ShiftedDenom denom(tc.theta, ms, m1, law.kappa_max(), t);
  const double et = law.expect_edge_fn([&](double k, double gap) { return k / denom(k, gap); });
  return tc.t2 + t * (1.0 + m1 * tc.t1) - tc.t1 / (law.e() * et);
}

double t4(const SpectralLaw& law, const ActivationMoments& m, double t, double eta) {
  const TConstants tc = t_constants(law, m);
  check_t_domain(t, tc.theta);
  const double ms = m.mu_star_sq;
  const double m1 = m.mu1 * m.mu1;
  const double d = law.d();
  const ShiftedDenom denom(tc.theta, ms, m1, law.kappa_max(), t);
  const double body =
      law.expect_edge_fn([&](double k, double gap) { return (ms + m1 * k) / denom(k, gap); });
  return eta / d * body + eta * (1.0 - 1.0 / d) * ms / denom.at_mustar();
}

TFunctions::TFunctions(SpectralLaw law, ActivationMoments m, double eta)
    : law_(std::move(law)), m_(m), eta_(eta) {
  const BaseMoments b = base_moments(law_, m_);
  if (b.denom <= 1e-14) throw DegenerateLaw("degenerate T1 denominator (mu_star^2 ~ 0)");
  a0_ = b.a0;
  a1_ = b.a1;
  b0_ = b.b0;
  denom_ = b.denom;
  tc_.t1 = law_.e() * a0_ / denom_;
  tc_.t2 = a1_ / (denom_ * a0_);
  tc_.theta = 1.0 / (m_.mu1 * m_.mu1 * law_.kappa_max() + m_.mu_star_sq);
  if (!(tc_.t1 > 0.0)) throw DegenerateLaw("T1 must be positive");
}

void TFunctions::check_domain(double t) const { check_t_domain(t, tc_.theta); }

double TFunctions::t3(double t) const {
  check_domain(t);
  const double ms = m_.mu_star_sq;
  const double m1 = m_.mu1 * m_.mu1;
  const ShiftedDenom denom(tc_.theta, ms, m1, law_.kappa_max(), t);
  const double et =
      law_.expect_edge_fn([&](double k, double gap) { return k / denom(k, gap); });
  return tc_.t2 + t * (1.0 + m1 * tc_.t1) - tc_.t1 / (law_.e() * et);
}

double TFunctions::t4(double t) const {
  check_domain(t);
  const double ms = m_.mu_star_sq;
  const double m1 = m_.mu1 * m_.mu1;
  const double d = law_.d();
  const ShiftedDenom denom(tc_.theta, ms, m1, law_.kappa_max(), t);
  const double body =
      law_.expect_edge_fn([&](double k, double gap) { return (ms + m1 * k) / denom(k, gap); });
  return eta_ / d * body + eta_ * (1.0 - 1.0 / d) * ms / denom.at_mustar();
}

double TFunctions::excess_q_coeff(double t) const {
  check_domain(t);
  const double ms = m_.mu_star_sq;
  const double m1 = m_.mu1 * m_.mu1;
  const ShiftedDenom denom(tc_.theta, ms, m1, law_.kappa_max(), t);
  const double et =
      law_.expect_edge_fn([&](double k, double gap) { return k / denom(k, gap); });
  const double dt = law_.expect_edge_fn(
      [&](double k, double gap) { return k / ((ms + m1 * k) * denom(k, gap)); });
  return dt / (law_.e() * a0_ * et);
}

}  // namespace rfasym
