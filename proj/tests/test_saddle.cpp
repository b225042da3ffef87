#include <doctest.h>

#include <cmath>

#include "rfasym/predict.hpp"
#include "rfasym/rng.hpp"
#include "rfasym/saddle.hpp"

using namespace rfasym;

namespace {

ActivationMoments relu_moments() { return moments(Activation::relu()); }
ActivationMoments sign_moments() { return moments(Activation::sign()); }

// simplified squared-loss objective assembled directly from the public
// spectral functionals and the label constants (independent of the solver's
// internal grouping)
double simplified_objective(const SaddleConfig& cfg, const GammaConstants& g, double q,
                            double beta, double t) {
  const TConstants tc = t_constants(cfg.law, cfg.moments);
  const double t3v = t3(cfg.law, cfg.moments, t);
  const double t4v = t4(cfg.law, cfg.moments, t, cfg.eta);
  const double quad = cfg.lambda * q * q / (2.0 * tc.t1) * (t + tc.t2 - t3v) -
                      cfg.lambda * t * beta * beta / 2.0;
  const double c = g.gamma1 + beta * beta + cfg.moments.mu1 * cfg.moments.mu1 * q * q -
                   2.0 * cfg.moments.mu1 * q * g.gamma2 - g.gamma3 * g.gamma3;
  return quad + cfg.lambda / (2.0 * t4v + 2.0 * cfg.lambda) * c;
}

SaddleConfig relu_regression_config(double lambda, double eta, double alpha) {
  SaddleConfig cfg{LossSpec::squared(),
                   TeacherSpec::relu(1.0, 0.05),
                   relu_moments(),
                   SpectralLaw::marchenko_pastur(alpha * eta),
                   lambda,
                   eta};
  return cfg;
}

}  // namespace

TEST_CASE("objective matches a hand-assembled point-mass expression") {
  // single atom at kappa0: every spectral functional in closed form
  const double kappa0 = 2.0, delta = 2.0, eta = 1.2, lambda = 0.25;
  const ActivationMoments m = sign_moments();
  const double ms = m.mu_star_sq, m1 = m.mu1 * m.mu1;
  SaddleConfig cfg{LossSpec::squared(), TeacherSpec::identity(1.0, 0.3), m,
                   SpectralLaw::point_mass(kappa0, delta), lambda, eta};
  SaddleProblem problem(cfg);

  const double om = ms + m1 * kappa0;
  const double t1 = kappa0 / ms;
  const double t2 = om / (ms * kappa0);

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const double q = 2.0 * (rng.uniform() - 0.5);
    const double beta = std::abs(q) / std::sqrt(t1) + 0.05 + rng.uniform();
    const double t = -0.5 / om + 3.0 * rng.uniform();
    const double t3v = t2 + t * (1.0 + m1 * t1) - t1 * (1.0 + t * om) / kappa0;
    const double t4v = eta / delta * om / (1.0 + t * om) +
                       eta * (1.0 - 1.0 / delta) * ms / (1.0 + t * ms);
    const double quad = lambda * q * q / (2.0 * t1) * (t + t2 - t3v) -
                        lambda * t * beta * beta / 2.0;
    const double env = expected_moreau(cfg.teacher, cfg.loss, m, 0.0, q, beta, t4v / lambda);
    const double hand = quad + env;
    CHECK(problem.objective(0.0, q, beta, t) == doctest::Approx(hand).epsilon(1e-10));
  }
}

TEST_CASE("objective equals the simplified squared-loss display at the optimal vartheta") {
  const SaddleConfig cfg = relu_regression_config(1e-2, 1.5, 3.0);
  const GammaConstants g = gamma_constants(cfg.teacher);
  const double vartheta = g.gamma3 / cfg.moments.mu0;
  SaddleProblem problem(cfg);
  Rng rng(5);
  for (int i = 0; i < 15; ++i) {
    const double q = 2.0 * (rng.uniform() - 0.5);
    const double beta =
        std::abs(q) / std::sqrt(problem.constants().t1) + 0.05 + 1.5 * rng.uniform();
    const double t = -0.8 * problem.constants().theta + 2.5 * rng.uniform();
    const double simplified = simplified_objective(cfg, g, q, beta, t);
    CHECK(problem.objective(vartheta, q, beta, t) ==
          doctest::Approx(simplified).epsilon(1e-8));
  }
}

TEST_CASE("tiny lambda reduces the objective to the envelope term") {
  SaddleConfig cfg = relu_regression_config(1e-10, 1.0, 2.0);
  SaddleProblem problem(cfg);
  const double q = 0.4, beta = 1.0, t = 0.7;
  const double x = t4(cfg.law, cfg.moments, t, cfg.eta) / cfg.lambda;
  const double env = expected_moreau(cfg.teacher, cfg.loss, cfg.moments, 0.5, q, beta, x);
  CHECK(problem.objective(0.5, q, beta, t) == doctest::Approx(env).epsilon(1e-8));
}

TEST_CASE("objective rejects t outside the domain") {
  SaddleConfig cfg = relu_regression_config(0.1, 1.0, 2.0);
  SaddleProblem problem(cfg);
  CHECK_THROWS_AS(problem.objective(0.0, 0.3, 1.0, -problem.constants().theta), OutOfDomain);
}

TEST_CASE("inner supremum: stationarity and unimodality in the interior") {
  SaddleConfig cfg = relu_regression_config(0.05, 0.8, 2.0);
  SaddleProblem problem(cfg);
  const double vartheta = 0.8, q = 0.3, beta = 0.9;
  const InnerSup sup = problem.inner_sup_t(vartheta, q, beta);
  REQUIRE(!sup.at_infinity);

  const double h = 1e-4 * (1.0 + std::abs(sup.t));
  const double fp = problem.objective(vartheta, q, beta, sup.t + h);
  const double fm = problem.objective(vartheta, q, beta, sup.t - h);
  const double deriv = (fp - fm) / (2.0 * h);
  CHECK(std::abs(deriv) < 1e-6);
  CHECK(problem.objective(vartheta, q, beta, sup.t) >= fp - 1e-12);
  CHECK(problem.objective(vartheta, q, beta, sup.t) >= fm - 1e-12);

  // unimodal along a grid: values rise to the max then fall
  const double theta = problem.constants().theta;
  double prev = -1e300;
  bool falling = false;
  for (int i = 0; i < 50; ++i) {
    const double t = -theta + std::exp(-6.0 + 0.35 * i);
    const double v = problem.objective(vartheta, q, beta, t);
    if (v < prev - 1e-12) falling = true;
    if (falling) CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("inner supremum at the cone boundary takes the closed limit") {
  SaddleConfig cfg = relu_regression_config(0.1, 1.2, 2.0);
  SaddleProblem problem(cfg);
  const double t1 = problem.constants().t1;
  const double q = 0.7;
  const double beta = std::abs(q) / std::sqrt(t1);
  const InnerSup sup = problem.inner_sup_t(0.5, q, beta);
  CHECK(sup.at_infinity);

  // the boundary value dominates the objective at any large finite t
  for (double t : {1e2, 1e4, 1e6}) {
    CHECK(sup.value >= problem.objective(0.5, q, beta, t) - 1e-9);
  }
  // and is approached monotonically from below
  const double f4 = problem.objective(0.5, q, beta, 1e4);
  const double f6 = problem.objective(0.5, q, beta, 1e6);
  CHECK(f6 >= f4 - 1e-12);
  CHECK(sup.value - f6 < 1e-3);
}

TEST_CASE("q = beta = 0: supremum value is the bare expected loss") {
  SaddleConfig cfg = relu_regression_config(0.1, 1.0, 2.0);
  SaddleProblem problem(cfg);
  const double vartheta = 0.4;
  const InnerSup sup = problem.inner_sup_t(vartheta, 0.0, 0.0);
  CHECK(sup.at_infinity);
  const double e0 = expected_loss(cfg.teacher, cfg.loss, cfg.moments, vartheta, 0.0, 0.0);
  CHECK(sup.value == doctest::Approx(e0).epsilon(1e-10));

  // the envelope value climbs towards this limit as t grows (T4 decreasing)
  double prev = -1e300;
  for (double t : {0.1, 1.0, 10.0, 100.0}) {
    const double v = problem.objective(vartheta, 0.0, 0.0, t);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= sup.value + 1e-10);
    prev = v;
  }
}

TEST_CASE("solve_qbeta: ridge domination at huge lambda") {
  SaddleConfig cfg = relu_regression_config(1e4, 1.0, 2.0);
  SaddleProblem problem(cfg);
  const auto res = problem.solve_qbeta(gamma_constants(cfg.teacher).gamma3 / cfg.moments.mu0);
  CHECK(std::abs(res.q) < 1e-3);
  CHECK(std::abs(res.beta) < 1e-3);
}

TEST_CASE("solve_qbeta agrees with a coarse grid + refinement oracle") {
  SaddleConfig cfg = relu_regression_config(0.1, 0.6, 2.0);
  SaddleProblem problem(cfg);
  const double vartheta = gamma_constants(cfg.teacher).gamma3 / cfg.moments.mu0;
  const auto res = problem.solve_qbeta(vartheta);

  // coarse grid over the cone patch, then one refinement pass
  const double t1 = problem.constants().t1;
  double best_q = 0.0, best_b = 0.0, best = 1e300;
  auto scan = [&](double qlo, double qhi, double blo, double bhi, int steps) {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= steps; ++j) {
        const double q = qlo + (qhi - qlo) * i / steps;
        const double b = blo + (bhi - blo) * j / steps;
        if (b < std::abs(q) / std::sqrt(t1)) continue;
        const double v = problem.inner_sup_t(vartheta, q, b).value;
        if (v < best) {
          best = v;
          best_q = q;
          best_b = b;
        }
      }
    }
  };
  scan(-3.0, 3.0, 0.0, 3.0, 40);
  const double dq = 6.0 / 40, db = 3.0 / 40;
  scan(best_q - dq, best_q + dq, std::max(best_b - db, 0.0), best_b + db, 24);

  CHECK(res.q == doctest::Approx(best_q).epsilon(0.02));
  CHECK(res.beta == doctest::Approx(best_b).epsilon(0.02));
  CHECK(res.value <= best + 1e-7);
}

TEST_CASE("solve pins vartheta for the relu teacher and squared loss") {
  SaddleConfig cfg = relu_regression_config(1e-2, 1.5, 3.0);
  const GammaConstants g = gamma_constants(cfg.teacher);
  const SaddleSolution sol = solve_saddle(cfg);
  CHECK(sol.vartheta_star ==
        doctest::Approx(g.gamma3 / cfg.moments.mu0).epsilon(2e-6));
}

TEST_CASE("odd activation solves with vartheta = 0") {
  SaddleConfig cfg{LossSpec::logistic(), TeacherSpec::sign_flip(1.0, 0.0), sign_moments(),
                   SpectralLaw::marchenko_pastur(1.5), 1e-2, 0.5};
  const SaddleSolution sol = solve_saddle(cfg);
  CHECK(sol.vartheta_star == 0.0);
  CHECK(sol.beta_star >= std::abs(sol.q_star) / std::sqrt(t_constants(cfg.law, cfg.moments).t1) -
                             1e-9);
}

TEST_CASE("returned solution beats random feasible probes") {
  SaddleConfig cfg = relu_regression_config(0.05, 1.2, 2.0);
  SaddleProblem problem(cfg);
  const SaddleSolution sol = problem.solve();
  const double t1 = problem.constants().t1;
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const double q = 4.0 * (rng.uniform() - 0.5);
    const double beta = std::abs(q) / std::sqrt(t1) + 2.0 * rng.uniform();
    const double vartheta = sol.vartheta_star + 2.0 * (rng.uniform() - 0.5);
    const double probe = problem.inner_sup_t(vartheta, q, beta).value;
    CHECK(sol.cost <= probe + 1e-7);
  }
}

TEST_CASE("cross-path consistency between the generic and closed solvers") {
  for (double eta : {0.4, 0.9, 1.6}) {
    SaddleConfig cfg = relu_regression_config(1e-2, eta, 3.0);
    cfg.tol.param = 1e-7;
    const SaddleSolution generic = solve_saddle(cfg);
    const SaddleSolution closed = solve_saddle_regression_closed(cfg);
    CHECK(std::abs(generic.cost - closed.cost) < 1e-6);
    CHECK(std::abs(generic.q_star - closed.q_star) < 1e-4);
    CHECK(std::abs(generic.beta_star - closed.beta_star) < 1e-4);
  }
}

TEST_CASE("vartheta map is midpoint convex") {
  SaddleConfig cfg = relu_regression_config(0.05, 1.0, 2.0);
  SaddleProblem problem(cfg);
  const double v1 = 0.0, v2 = 1.2;
  const double f1 = problem.solve_qbeta(v1).value;
  const double fm = problem.solve_qbeta(0.5 * (v1 + v2)).value;
  const double f2 = problem.solve_qbeta(v2).value;
  CHECK(fm <= 0.5 * (f1 + f2) + 1e-8);
}

TEST_CASE("min-max ordering at the returned saddle point") {
  SaddleConfig cfg = relu_regression_config(0.05, 1.0, 2.0);
  SaddleProblem problem(cfg);
  const SaddleSolution sol = problem.solve();
  REQUIRE(!sol.t_at_infinity());
  Rng rng(7);
  // perturbing (q, beta) cannot lower the sup value; perturbing t cannot
  // raise the objective at the optimum
  for (int i = 0; i < 25; ++i) {
    const double dq = 0.2 * (rng.uniform() - 0.5);
    const double db = 0.2 * rng.uniform();
    const double probe =
        problem.inner_sup_t(sol.vartheta_star, sol.q_star + dq, sol.beta_star + db).value;
    CHECK(probe >= sol.cost - 1e-8);
    const double t_probe = sol.t_star * (1.0 + 0.3 * (rng.uniform() - 0.5)) +
                           0.01 * (rng.uniform() - 0.5);
    if (t_probe > -problem.constants().theta + 1e-6) {
      CHECK(problem.objective(sol.vartheta_star, sol.q_star, sol.beta_star, t_probe) <=
            sol.cost + 1e-8);
    }
  }
}
