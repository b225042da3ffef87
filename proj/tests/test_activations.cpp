#include <doctest.h>

#include <cmath>

#include "rfasym/activations.hpp"

using namespace rfasym;

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}

TEST_CASE("pointwise evaluation") {
  CHECK(Activation::relu()(-1.5) == 0.0);
  CHECK(Activation::relu()(2.0) == 2.0);
  CHECK(Activation::sign()(0.3) == 1.0);
  CHECK(Activation::sign()(0.0) == 1.0);  // sign(0) = +1
  CHECK(Activation::sign()(-0.3) == -1.0);
  CHECK(Activation::softplus()(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(Activation::binary_step()(0.0) == 1.0);
  CHECK(Activation::binary_step()(-1e-9) == 0.0);
  CHECK(Activation::identity()(0.7) == 0.7);
}

TEST_CASE("odd activations are odd pointwise") {
  for (const Activation& act : {Activation::sign(), Activation::tanh(), Activation::erf(),
                                Activation::identity()}) {
    CHECK(act.is_odd());
    for (double x = 0.1; x < 5.0; x += 0.37) CHECK(act(-x) == doctest::Approx(-act(x)).epsilon(1e-15));
  }
}

TEST_CASE("relu moments match the analytic half-moment integrals") {
  const ActivationMoments m = moments(Activation::relu());
  CHECK(m.mu0 == doctest::Approx(kInvSqrt2Pi).epsilon(1e-12));
  CHECK(m.mu1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.mu_star_sq == doctest::Approx(0.25 - 1.0 / (2.0 * M_PI)).epsilon(1e-11));
}

TEST_CASE("sign moments: E|z| and unit second moment") {
  const ActivationMoments m = moments(Activation::sign());
  CHECK(std::abs(m.mu0) < 1e-12);
  CHECK(m.mu1 == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  CHECK(m.mu_star_sq == doctest::Approx(1.0 - 2.0 / M_PI).epsilon(1e-11));
}

TEST_CASE("identity moments") {
  const ActivationMoments m = moments(Activation::identity());
  CHECK(m.mu0 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(m.mu1 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(m.mu_star_sq) < 1e-12);
}

TEST_CASE("softplus linear component is exactly one half") {
  // Stein: E[z softplus(z)] = E[sigmoid(z)] = 1/2 by symmetry
  const ActivationMoments m = moments(Activation::softplus());
  CHECK(m.mu1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.mu0 > 0.0);
  CHECK(m.mu_star_sq > 0.0);
}

TEST_CASE("binary step moments") {
  const ActivationMoments m = moments(Activation::binary_step());
  CHECK(m.mu0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.mu1 == doctest::Approx(kInvSqrt2Pi).epsilon(1e-12));
  CHECK(m.mu_star_sq == doctest::Approx(0.25 - 1.0 / (2.0 * M_PI)).epsilon(1e-11));
}

TEST_CASE("moments stable across quadrature orders") {
  for (const Activation& act :
       {Activation::relu(), Activation::softplus(), Activation::tanh(), Activation::erf(),
        Activation::sign(), Activation::binary_step(), Activation::identity()}) {
    const ActivationMoments a = moments(act, 64);
    const ActivationMoments b = moments(act, 128);
    CHECK(std::abs(a.mu0 - b.mu0) < 1e-10);
    CHECK(std::abs(a.mu1 - b.mu1) < 1e-10);
    CHECK(std::abs(a.mu_star_sq - b.mu_star_sq) < 1e-10);
  }
}

TEST_CASE("odd activations have vanishing mean") {
  for (const Activation& act :
       {Activation::sign(), Activation::tanh(), Activation::erf(), Activation::identity()}) {
    CHECK(std::abs(moments(act).mu0) < 1e-12);
  }
}

TEST_CASE("moment decomposition matches E[s^2]") {
  for (const Activation& act :
       {Activation::relu(), Activation::softplus(), Activation::tanh(), Activation::erf(),
        Activation::sign(), Activation::binary_step()}) {
    const ActivationMoments m = moments(act);
    // recompute E[s^2] independently on a fine split grid
    const Activation& a = act;
    double second = 0.0;
    const int n = 400000;
    // trapezoid on [-10, 10] against the normal density
    double prev = 0.0;
    bool first = true;
    for (int i = 0; i <= n; ++i) {
      const double z = -10.0 + 20.0 * i / n;
      const double f = a(z) * a(z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
      if (!first) second += 0.5 * (prev + f) * (20.0 / n);
      prev = f;
      first = false;
    }
    // trapezoid carries an O(h) bias at jump discontinuities (binary step)
    CHECK(m.second_moment() == doctest::Approx(second).epsilon(5e-5));
  }
}

TEST_CASE("custom activation with non-positive mu1 is rejected") {
  const Activation even = Activation::custom([](double x) { return x * x; }, false, "square");
  CHECK_THROWS_AS(moments(even), NonPositiveMu1);
}

TEST_CASE("custom smooth activation works through plain quadrature") {
  const Activation gelu_like =
      Activation::custom([](double x) { return x / (1.0 + std::exp(-1.702 * x)); }, false, "si");
  const ActivationMoments m = moments(gelu_like);
  CHECK(m.mu1 > 0.0);
  CHECK(m.mu_star_sq >= 0.0);
}
