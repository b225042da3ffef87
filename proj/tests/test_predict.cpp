#include <doctest.h>

#include <cmath>

#include "rfasym/predict.hpp"
#include "rfasym/rng.hpp"

using namespace rfasym;

namespace {
const ActivationMoments kReluM = moments(Activation::relu());
const ActivationMoments kSignM = moments(Activation::sign());
const ActivationMoments kStepM = moments(Activation::binary_step());
}  // namespace

TEST_CASE("overlap gaussian structure") {
  const OverlapGaussian g = OverlapGaussian::from(0.7, 1.2, 0.4, 1.5, kReluM);
  CHECK(g.mean2 == doctest::Approx(kReluM.mu0 * 0.4));
  CHECK(g.var1 == doctest::Approx(2.25));
  CHECK(g.cov == doctest::Approx(kReluM.mu1 * 1.5 * 0.7));
  CHECK(g.var2 == doctest::Approx(kReluM.mu1 * kReluM.mu1 * 0.49 + 1.44));
  CHECK(g.psd());
  CHECK(g.det() >= 0.0);
}

TEST_CASE("training error is the optimal cost") {
  SaddleSolution sol;
  sol.cost = 0.37;
  CHECK(training_error(sol) == 0.37);
}

TEST_CASE("regression closed form: identity teacher") {
  // E[(nu1 - nu2)^2] expanded in the overlaps
  const TeacherSpec t = TeacherSpec::identity(1.0, 0.1);
  for (double q : {-0.4, 0.3, 1.2}) {
    for (double beta : {0.0, 0.7}) {
      const double closed = gen_error_closed(q, beta, 0.0, t, kReluM, Predictor::Identity);
      const double m1q = kReluM.mu1 * q;
      CHECK(closed == doctest::Approx(1.0 - 2.0 * m1q + m1q * m1q + beta * beta).epsilon(1e-12));
      const double generic = gen_error_generic(q, beta, 0.0, t, kReluM, Predictor::Identity);
      CHECK(generic == doctest::Approx(closed).epsilon(1e-7));
    }
  }
}

TEST_CASE("regression closed form: relu teacher chi moments") {
  const TeacherSpec t = TeacherSpec::relu(1.0, 0.05);
  const double q = 0.6, beta = 0.8, vartheta = 1.0;
  const double closed = gen_error_closed(q, beta, vartheta, t, kReluM, Predictor::Identity);
  const double chi0 = 0.3989422804014327, chi1 = 0.5, chi2 = 0.5;
  const double expect = chi2 - 2.0 * kReluM.mu1 * chi1 * q + kReluM.mu1 * kReluM.mu1 * q * q +
                        beta * beta - 2.0 * kReluM.mu0 * chi0 * vartheta +
                        kReluM.mu0 * kReluM.mu0 * vartheta * vartheta;
  CHECK(closed == doctest::Approx(expect).epsilon(1e-12));
  CHECK(gen_error_generic(q, beta, vartheta, t, kReluM, Predictor::Identity) ==
        doctest::Approx(closed).epsilon(1e-7));
}

TEST_CASE("relu teacher at the zero solution returns chi2") {
  const TeacherSpec t = TeacherSpec::relu(1.0, 0.0);
  CHECK(gen_error_closed(0.0, 0.0, 0.0, t, kReluM, Predictor::Identity) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("classification closed form: arccos expression") {
  const TeacherSpec t = TeacherSpec::sign_flip(1.0, 0.1);
  const double p = t.flip_prob;
  for (double q : {0.2, 1.0}) {
    for (double beta : {0.3, 1.5}) {
      const double closed = gen_error_closed(q, beta, 0.0, t, kSignM, Predictor::Sign);
      const double r = kSignM.mu1 * q /
                       std::sqrt(kSignM.mu1 * kSignM.mu1 * q * q + beta * beta);
      CHECK(closed == doctest::Approx(p + (1.0 - 2.0 * p) / M_PI * std::acos(r)).epsilon(1e-12));
      const double generic = gen_error_generic(q, beta, 0.0, t, kSignM, Predictor::Sign);
      CHECK(generic == doctest::Approx(closed).epsilon(1e-7));
    }
  }
}

TEST_CASE("classification corner cases") {
  const TeacherSpec t0 = TeacherSpec::sign_flip(1.0, 0.0);
  // beta -> 0 with positive alignment: perfect sign agreement
  CHECK(gen_error_closed(0.5, 0.0, 0.0, t0, kSignM, Predictor::Sign) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // orthogonal student: arccos(0) = pi/2, error 1/2
  CHECK(gen_error_closed(0.0, 1.0, 0.0, t0, kSignM, Predictor::Sign) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // coin-flip labels: 1/2 regardless of the solution
  const TeacherSpec thalf = TeacherSpec::sign_flip(1.0, 0.5);
  CHECK(gen_error_closed(0.9, 0.4, 0.0, thalf, kSignM, Predictor::Sign) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gen_error_generic(0.9, 0.4, 0.0, thalf, kSignM, Predictor::Sign) ==
        doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("no closed form cases") {
  const TeacherSpec t = TeacherSpec::sign_flip(1.0, 0.0);
  // sign/sign with a mean offset has no closed form
  CHECK_THROWS_AS(gen_error_closed(0.5, 0.5, 1.0, t, kStepM, Predictor::Sign), NoClosedForm);
  // relu teacher with a sign predictor
  CHECK_THROWS_AS(
      gen_error_closed(0.5, 0.5, 0.0, TeacherSpec::relu(1.0, 0.0), kReluM, Predictor::Sign),
      NoClosedForm);
  // gen_error falls back to the generic path
  const double v = gen_error(0.5, 0.5, 1.0, t, kStepM, Predictor::Sign);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
}

TEST_CASE("generic path handles the mean offset against Monte Carlo") {
  const TeacherSpec t = TeacherSpec::sign_flip(1.0, 0.05);
  const double q = 0.6, beta = 0.9, vartheta = 0.8;
  const double generic = gen_error_generic(q, beta, vartheta, t, kStepM, Predictor::Sign);
  Rng rng(41);
  double acc = 0.0;
  const int n = 2000000;
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double nu2 = kStepM.mu0 * vartheta + kStepM.mu1 * q * z1 + beta * rng.normal();
    const double y = (z1 >= 0.0 ? 1.0 : -1.0) * (rng.bernoulli(t.flip_prob) ? -1.0 : 1.0);
    const double pred = nu2 >= 0.0 ? 1.0 : -1.0;
    acc += 0.25 * (y - pred) * (y - pred);
  }
  const double mc = acc / n;
  CHECK(generic == doctest::Approx(mc).epsilon(0.01));
}

TEST_CASE("sign-flip symmetry of the classification error") {
  // flipping the sign of q mirrors the error around 1/2 when p = 0
  const TeacherSpec t = TeacherSpec::sign_flip(1.0, 0.0);
  const double e_plus = gen_error_generic(0.7, 0.8, 0.0, t, kSignM, Predictor::Sign);
  const double e_minus = gen_error_generic(-0.7, 0.8, 0.0, t, kSignM, Predictor::Sign);
  CHECK(e_plus + e_minus == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("classification errors stay in [0, 1]") {
  const TeacherSpec t = TeacherSpec::sign_flip(1.0, 0.2);
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const double q = 4.0 * (rng.uniform() - 0.5);
    const double beta = 3.0 * rng.uniform();
    const double v = gen_error_generic(q, beta, 0.0, t, kSignM, Predictor::Sign);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("degenerate covariance reduces to one dimension") {
  const TeacherSpec t = TeacherSpec::identity(1.0, 0.0);
  // beta = 0: nu2 is an affine function of nu1
  const double v = gen_error_generic(0.8, 0.0, 0.3, t, kReluM, Predictor::Identity);
  const double m1q = kReluM.mu1 * 0.8;
  const double mean2 = kReluM.mu0 * 0.3;
  // E[(z - mean2 - m1q z)^2] = (1 - m1q)^2 + mean2^2
  CHECK(v == doctest::Approx((1.0 - m1q) * (1.0 - m1q) + mean2 * mean2).epsilon(1e-9));
}
