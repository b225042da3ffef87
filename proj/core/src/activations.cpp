#include "rfasym/activations.hpp"

#include <algorithm>
#include <cmath>

#include "rfasym/quadrature.hpp"

namespace rfasym {

namespace {

double softplus_eval(double x) {
  // log(1 + e^x) without overflow
  if (x > 36.0) return x;
  if (x < -36.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

Activation::Activation(ActivationKind kind, bool odd, std::string name, std::vector<double> kinks)
    : kind_(kind), odd_(odd), name_(std::move(name)), kinks_(std::move(kinks)) {}

Activation Activation::relu() { return Activation(ActivationKind::ReLU, false, "relu", {0.0}); }
Activation Activation::softplus() {
  return Activation(ActivationKind::SoftPlus, false, "softplus", {});
}
Activation Activation::tanh() { return Activation(ActivationKind::Tanh, true, "tanh", {}); }
Activation Activation::erf() { return Activation(ActivationKind::Erf, true, "erf", {}); }
Activation Activation::sign() { return Activation(ActivationKind::Sign, true, "sign", {0.0}); }
Activation Activation::binary_step() {
  return Activation(ActivationKind::BinaryStep, false, "binarystep", {0.0});
}
Activation Activation::identity() {
  return Activation(ActivationKind::Identity, true, "identity", {});
}

Activation Activation::custom(std::function<double(double)> fn, bool odd, std::string name) {
  Activation act(ActivationKind::Custom, odd, std::move(name), {});
  act.fn_ = std::move(fn);
  return act;
}

double Activation::operator()(double x) const {
  switch (kind_) {
    case ActivationKind::ReLU:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::SoftPlus:
      return softplus_eval(x);
    case ActivationKind::Tanh:
      return std::tanh(x);
    case ActivationKind::Erf:
      return std::erf(x);
    case ActivationKind::Sign:
      return x >= 0.0 ? 1.0 : -1.0;
    case ActivationKind::BinaryStep:
      return x >= 0.0 ? 1.0 : 0.0;
    case ActivationKind::Identity:
      return x;
    case ActivationKind::Custom:
      return fn_(x);
  }
  return 0.0;
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu();
  if (name == "softplus") return Activation::softplus();
  if (name == "tanh") return Activation::tanh();
  if (name == "erf") return Activation::erf();
  if (name == "sign") return Activation::sign();
  if (name == "binarystep" || name == "binary_step" || name == "step")
    return Activation::binary_step();
  if (name == "identity") return Activation::identity();
  throw ConfigError("unknown activation: " + name);
}

double ActivationMoments::mu_star() const { return std::sqrt(std::max(mu_star_sq, 0.0)); }

namespace {

constexpr double kTail = 12.0;  // N(0,1) mass beyond 12 sigma is ~1e-33

double normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// E[g(z) s(z)^p ...] with the integration split at the activation's kinks so
// that each piece is smooth.
template <class F>
double split_expectation(const Activation& act, const std::vector<double>& kinks, F&& g) {
  std::vector<double> cuts = {-kTail, kTail};
  for (double k : kinks)
    if (k > -kTail && k < kTail) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    acc += integrate([&](double z) { return g(z) * normal_pdf(z); }, cuts[i], cuts[i + 1], 1e-13,
                     1e-15);
  }
  return acc;
}

struct RawMoments {
  double m0, m1, m2;  // E[s], E[z s], E[s^2]
};

RawMoments raw_moments(const Activation& act, int order) {
  if (!act.kinks().empty()) {
    RawMoments r;
    r.m0 = split_expectation(act, act.kinks(), [&](double z) { return act(z); });
    r.m1 = split_expectation(act, act.kinks(), [&](double z) { return z * act(z); });
    r.m2 = split_expectation(act, act.kinks(), [&](double z) { return act(z) * act(z); });
    return r;
  }
  RawMoments r;
  r.m0 = gauss_expectation([&](double z) { return act(z); }, order);
  r.m1 = gauss_expectation([&](double z) { return z * act(z); }, order);
  r.m2 = gauss_expectation([&](double z) { return act(z) * act(z); }, order);
  return r;
}

}  // namespace

ActivationMoments moments(const Activation& act, int quad_order) {
  if (quad_order < 16) throw std::invalid_argument("moments: quad_order must be >= 16");

  RawMoments r = raw_moments(act, quad_order);
  const RawMoments r2 = raw_moments(act, 2 * quad_order);
  const double scale = std::max(1.0, std::abs(r2.m2));
  if (std::abs(r2.m2 - r.m2) > 1e-8 * scale)
    throw DivergentMoment("E[s(z)^2] did not converge across quadrature orders for " +
                          act.name());
  r = r2;

  ActivationMoments m;
  m.mu0 = r.m0;
  m.mu1 = r.m1;
  m.mu_star_sq = r.m2 - m.mu0 * m.mu0 - m.mu1 * m.mu1;

  if (act.is_odd() && std::abs(m.mu0) > 1e-12)
    throw DivergentMoment("odd activation with nonzero mean: " + act.name());

  if (m.mu1 <= 1e-12)
    throw NonPositiveMu1("activation has E[z s(z)] <= 0: " + act.name());
  if (m.mu_star_sq < 0.0) {
    if (m.mu_star_sq < -1e-12)
      throw DivergentMoment("negative residual variance for " + act.name());
    m.mu_star_sq = 0.0;
  }
  return m;
}

}  // namespace rfasym
