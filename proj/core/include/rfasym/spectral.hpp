#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rfasym/activations.hpp"
#include "rfasym/errors.hpp"
#include "rfasym/quadrature.hpp"

namespace rfasym {

enum class LawKind { PointMass, MarchenkoPastur, Empirical };

// Support and density of the limiting eigenvalue law of the Gram matrix of a
// feature matrix with iid N(0, 1/n) columns, at aspect ratio delta = k/n.
// Support edges are (1 -+ sqrt(delta))^2 regardless of which Gram matrix
// (k x k or n x n) is the smaller one.
std::pair<double, double> mp_support(double delta);
double mp_density(double delta, double kappa);

// Limiting eigenvalue law P_kappa of T = F F^T (delta > 1) or F^T F
// (delta <= 1). Immutable after construction.
class SpectralLaw {
 public:
  static SpectralLaw point_mass(double kappa0, double delta);
  static SpectralLaw marchenko_pastur(double delta);
  static SpectralLaw empirical(std::vector<double> eigenvalues, double delta);
  // Limit law of the equal-singular-value orthogonal ensemble: a point mass
  // at max(delta, 1).
  static SpectralLaw orthogonal(double delta);

  LawKind kind() const { return kind_; }
  double delta() const { return delta_; }
  double e() const { return delta_ >= 1.0 ? 1.0 : delta_; }
  double d() const { return delta_ >= 1.0 ? delta_ : 1.0; }
  double kappa_min() const { return kappa_min_; }
  double kappa_max() const { return kappa_max_; }
  const std::vector<double>& eigenvalues() const { return eigs_; }

  // E_kappa[g(kappa)]: exact for PointMass, edge-desingularized adaptive
  // quadrature for MarchenkoPastur, sample mean for Empirical.
  template <class F>
  double expect_fn(F&& g) const {
    return expect_edge_fn([&](double kappa, double) { return g(kappa); });
  }

  // Same expectation, with g(kappa, upper_gap) receiving the distance
  // kappa_max - kappa in a form that stays exact near the upper edge, where
  // resolvent-style denominators otherwise lose all precision to rounding.
  template <class G>
  double expect_edge_fn(G&& g) const {
    switch (kind_) {
      case LawKind::PointMass:
        return g(kappa_min_, 0.0);
      case LawKind::Empirical: {
        double acc = 0.0;
        for (double x : eigs_) acc += g(x, kappa_max_ - x);
        return acc / static_cast<double>(eigs_.size());
      }
      case LawKind::MarchenkoPastur:
        return mp_expect(std::forward<G>(g));
    }
    return 0.0;
  }

  double expect(const std::function<double(double)>& g) const { return expect_fn(g); }

 private:
  SpectralLaw(LawKind kind, double delta, double kmin, double kmax, std::vector<double> eigs);

  // Substitutes kappa = edge -+ u^2 on each half so the sqrt edge factors of
  // the density (and the 1/sqrt(kappa) singularity at delta = 1) vanish. The
  // upper gap b - kappa is propagated as u^2 (right half) or span - u^2
  // (left half) rather than recovered from the rounded kappa.
  template <class G>
  double mp_expect(G&& g) const {
    const auto [a, b] = mp_support(delta_);
    const double span = b - a;
    const double c = 0.5 * (a + b);
    const double norm = 1.0 / (2.0 * M_PI * e());
    auto left = [&](double u) {
      const double kappa = a + u * u;
      const double upper_gap = span - u * u;
      const double w = 2.0 * u * u * std::sqrt(std::max(upper_gap, 0.0)) * norm / kappa;
      return w * g(kappa, upper_gap);
    };
    auto right = [&](double u) {
      const double upper_gap = u * u;
      const double kappa = b - upper_gap;
      const double w = 2.0 * u * u * std::sqrt(std::max(span - upper_gap, 0.0)) * norm / kappa;
      return w * g(kappa, upper_gap);
    };
    const double tol = 1e-12;
    return integrate(left, 0.0, std::sqrt(c - a), tol, 1e-15) +
           integrate(right, 0.0, std::sqrt(b - c), tol, 1e-15);
  }

  LawKind kind_;
  double delta_;
  double kappa_min_;
  double kappa_max_;
  std::vector<double> eigs_;
};

// One eigenvalue per line, ascending; positivity validated.
std::vector<double> load_eigenvalues(const std::string& path);

struct TConstants {
  double t1 = 0.0;
  double t2 = 0.0;
  double theta = 0.0;  // 1 / (mu1^2 kappa_max + mu_star^2)
};

TConstants t_constants(const SpectralLaw& law, const ActivationMoments& m);
double t3(const SpectralLaw& law, const ActivationMoments& m, double t);
double t4(const SpectralLaw& law, const ActivationMoments& m, double t, double eta);

// Cached evaluator for the t-dependent spectral functionals of a fixed
// (law, moments, eta) triple.
class TFunctions {
 public:
  TFunctions(SpectralLaw law, ActivationMoments m, double eta);

  const TConstants& constants() const { return tc_; }
  const SpectralLaw& law() const { return law_; }
  double eta() const { return eta_; }

  double t3(double t) const;
  double t4(double t) const;

  // Value of (t + T2 - T3(t)) / T1 - t / T1, computed in a cancellation-free
  // form that is stable for arbitrarily large t:
  //   excess(t) = D(t) / (e A0 E(t)),
  //   E(t) = E_k[k / (1 + t(mu*^2 + mu1^2 k))],
  //   D(t) = E_k[k / ((mu*^2 + mu1^2 k)(1 + t(mu*^2 + mu1^2 k)))],
  // using mu1^2 + 1/T1 = 1/(e A0). Tends to boundary_coeff() as t -> inf.
  double excess_q_coeff(double t) const;
  double boundary_coeff() const { return a1_ / (law_.e() * a0_ * a0_); }

 private:
  void check_domain(double t) const;

  SpectralLaw law_;
  ActivationMoments m_;
  double eta_;
  TConstants tc_;
  double a0_, a1_, b0_, denom_;
};

}  // namespace rfasym
