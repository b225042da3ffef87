#include "rfasym/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rfasym {

namespace {

constexpr double kGolden = 0.6180339887498948482;
constexpr double kULo = -25.0;  // u = log(t + theta) window; stays inside the t > -theta + 1e-12 guard
constexpr double kUHi = 40.0;

// Brent maximization on a bracket [a, b] with interior point x0, f(x0) = f0
// already the best seen. Parabolic steps with golden-section fallback.
template <class F>
std::pair<double, double> brent_max(F&& f, double a, double b, double x0, double f0,
                                    double tol) {
  const double cgold = 1.0 - kGolden;
  double x = x0, w = x0, v = x0;
  double fx = f0, fw = f0, fv = f0;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 120; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * 0.5 + 1e-14 * std::abs(x);
    if (std::abs(x - xm) <= 2.0 * tol1 - 0.5 * (b - a)) break;
    bool take_golden = true;
    if (std::abs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double qq = (x - v) * (fx - fw);
      double pp = (x - v) * qq - (x - w) * r;
      qq = 2.0 * (qq - r);
      if (qq > 0.0) pp = -pp;
      qq = std::abs(qq);
      const double e_old = e;
      e = d;
      if (std::abs(pp) < std::abs(0.5 * qq * e_old) && pp > qq * (a - x) &&
          pp < qq * (b - x)) {
        d = pp / qq;
        const double u = x + d;
        if (u - a < 2.0 * tol1 || b - u < 2.0 * tol1) d = x < xm ? tol1 : -tol1;
        take_golden = false;
      }
    }
    if (take_golden) {
      e = (x >= xm ? a : b) - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu >= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu >= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu >= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx};
}

}  // namespace

SaddleProblem::SaddleProblem(SaddleConfig cfg, EnvelopeMode mode)
    : cfg_(std::move(cfg)),
      mode_(mode),
      tf_(cfg_.law, cfg_.moments, cfg_.eta),
      lambda_(cfg_.lambda),
      labels_(label_moments(cfg_.teacher)),
      envelope_order_(cfg_.quad.order),
      warm_q_(cfg_.init_q),
      warm_beta_(cfg_.init_beta) {
  if (!(cfg_.lambda > 0.0)) throw std::invalid_argument("saddle: lambda must be positive");
  if (!(cfg_.eta > 0.0)) throw std::invalid_argument("saddle: eta must be positive");
  if (mode_ == EnvelopeMode::ClosedSquared && cfg_.loss.kind != LossKind::Squared)
    throw NoClosedForm("closed saddle path requires the squared loss");
}

double SaddleProblem::closed_second_moment(double vartheta, double q, double beta) const {
  // E[V^2] with V = beta H + mu0 vartheta + mu1 q S - Y
  const double m0t = cfg_.moments.mu0 * vartheta;
  const double m1q = cfg_.moments.mu1 * q;
  return beta * beta + m0t * m0t + m1q * m1q + labels_.y2 - 2.0 * m0t * labels_.y -
         2.0 * m1q * labels_.ys;
}

double SaddleProblem::envelope(double vartheta, double q, double beta, double x) const {
  ++envelope_evals_;
  if (mode_ == EnvelopeMode::ClosedSquared)
    return closed_second_moment(vartheta, q, beta) / (2.0 * (1.0 + x));
  EnvelopeQuadrature quad = cfg_.quad;
  quad.order = envelope_order_;
  quad.refine = false;
  return expected_moreau(cfg_.teacher, cfg_.loss, cfg_.moments, vartheta, q, beta, x, quad);
}

double SaddleProblem::envelope_at_zero_scale(double vartheta, double q, double beta) const {
  ++envelope_evals_;
  if (mode_ == EnvelopeMode::ClosedSquared)
    return 0.5 * closed_second_moment(vartheta, q, beta);
  EnvelopeQuadrature quad = cfg_.quad;
  quad.order = envelope_order_;
  quad.refine = false;
  return expected_loss(cfg_.teacher, cfg_.loss, cfg_.moments, vartheta, q, beta, quad);
}

void SaddleProblem::calibrate_envelope_order(double vartheta, double q, double beta, double x) {
  if (mode_ == EnvelopeMode::ClosedSquared || !cfg_.quad.refine) return;
  EnvelopeQuadrature quad = cfg_.quad;
  quad.refine = false;
  int order = envelope_order_;
  quad.order = order;
  double val = expected_moreau(cfg_.teacher, cfg_.loss, cfg_.moments, vartheta, q, beta, x, quad);
  while (2 * order <= cfg_.quad.max_order) {
    quad.order = 2 * order;
    const double next =
        expected_moreau(cfg_.teacher, cfg_.loss, cfg_.moments, vartheta, q, beta, x, quad);
    if (std::abs(next - val) <= cfg_.quad.tol * std::max(1.0, std::abs(next))) break;
    val = next;
    order *= 2;
  }
  envelope_order_ = std::max(envelope_order_, order);
}

double SaddleProblem::objective(double vartheta, double q, double beta, double t) const {
  const TConstants& tc = tf_.constants();
  if (t <= -tc.theta + 1e-12) throw OutOfDomain("objective: t must satisfy t > -theta");
  // lambda q^2/(2 T1) (t + T2 - T3(t)) - lambda t beta^2 / 2, grouped so that
  // the O(t) parts cancel exactly through excess_q_coeff
  const double quad_part =
      0.5 * lambda_ * (t * (q * q / tc.t1 - beta * beta) + q * q * tf_.excess_q_coeff(t));
  return quad_part + envelope(vartheta, q, beta, tf_.t4(t) / lambda_);
}

std::pair<double, double> SaddleProblem::project(double q, double beta) const {
  const double c = 1.0 / std::sqrt(tf_.constants().t1);
  if (beta >= c * std::abs(q)) return {q, beta};
  const double s = (std::abs(q) + c * beta) / (1.0 + c * c);
  if (s <= 0.0) return {0.0, 0.0};
  return {q >= 0.0 ? s : -s, c * s};
}

InnerSup SaddleProblem::inner_sup_t(double vartheta, double q, double beta) const {
  return sup_over_t(vartheta, q, beta, cfg_.tol.t_rel_width);
}

InnerSup SaddleProblem::sup_over_t(double vartheta, double q, double beta,
                                   double width_tol) const {
  // Discretize the envelope law of (V, Z) once; every probe in t then only
  // re-evaluates the scalar prox at a new scale (and the squared loss
  // collapses to a rational function of the scale).
  double ev2 = 0.0;
  EnvelopeSamples samples;
  bool use_ev2 = false;
  if (mode_ == EnvelopeMode::ClosedSquared) {
    ev2 = closed_second_moment(vartheta, q, beta);
    use_ev2 = true;
  } else {
    samples = envelope_samples(cfg_.teacher, cfg_.loss, cfg_.moments, vartheta, q, beta,
                               envelope_order_, cfg_.quad.collapse_gaussian_noise);
    if (cfg_.loss.kind == LossKind::Squared && samples.zscale.empty()) {
      ev2 = samples.second_moment();
      use_ev2 = true;
    }
  }
  auto env_at = [&](double x) {
    ++envelope_evals_;
    if (use_ev2) return ev2 / (2.0 * (1.0 + x));
    return samples.moreau_at(cfg_.loss.kind, x);
  };
  auto env_limit = [&]() {
    ++envelope_evals_;
    if (use_ev2) return 0.5 * ev2;
    return samples.loss_at(cfg_.loss.kind);
  };

  const TConstants& tc = tf_.constants();
  const double gap = beta * beta - q * q / tc.t1;
  const double scale = std::max({1.0, beta * beta, q * q / tc.t1});
  if (gap <= cfg_.tol.boundary_gap * scale) {
    // Cone boundary: the supremum occurs in the t -> infinity limit, where
    // T4 -> 0 and the envelope tends towards the bare expected loss.
    InnerSup res;
    res.t = std::numeric_limits<double>::infinity();
    res.at_infinity = true;
    res.value = 0.5 * lambda_ * q * q * tf_.boundary_coeff() + env_limit();
    return res;
  }

  // maximize on u = log(t + theta); the monotone reparametrization keeps the
  // strictly concave objective unimodal
  auto fu = [&](double u) {
    const double t = std::exp(u) - tc.theta;
    const double quad_part =
        0.5 * lambda_ * (t * (q * q / tc.t1 - beta * beta) + q * q * tf_.excess_q_coeff(t));
    return quad_part + env_at(tf_.t4(t) / lambda_);
  };

  double um = have_warm_t_ ? warm_u_ : std::log(1.0 + tc.theta);
  um = std::clamp(um, kULo + 1.0, kUHi - 1.0);
  double fm = fu(um);
  double step = 0.5;
  double ul = um - step, uh = um + step;
  double fl = fu(ul), fh = fu(uh);
  while (fh >= fm || fl >= fm) {
    if (fh >= fm) {
      ul = um;
      fl = fm;
      um = uh;
      fm = fh;
      step *= 2.0;
      uh = um + step;
      if (uh > kUHi) throw BracketFailure("inner supremum: no finite bracket found");
      fh = fu(uh);
    } else {
      uh = um;
      fh = fm;
      um = ul;
      fm = fl;
      step *= 2.0;
      ul = um - step;
      if (ul < kULo) {
        // supremum pushed against t = -theta; report the edge point
        InnerSup res;
        res.t = std::exp(um) - tc.theta;
        res.value = fm;
        last_t_lo_ = ul;
        last_t_hi_ = uh;
        return res;
      }
      fl = fu(ul);
    }
  }
  last_t_lo_ = ul;
  last_t_hi_ = uh;

  // width on u is relative width on t + theta
  const auto [ustar, fstar] = brent_max(fu, ul, uh, um, fm, width_tol);
  InnerSup res;
  res.t = std::exp(ustar) - tc.theta;
  res.value = fstar;
  warm_u_ = ustar;
  have_warm_t_ = true;
  return res;
}

SaddleProblem::QBetaResult SaddleProblem::descend_qbeta(double vartheta, double param_tol,
                                                        double cost_tol) {
  const double descent_width = std::max(cfg_.tol.t_rel_width, 1e-6);
  auto value_at = [&](double q, double beta) {
    return sup_over_t(vartheta, q, beta, descent_width).value;
  };

  auto [q, beta] = project(warm_q_, warm_beta_);
  double f = value_at(q, beta);
  const double sqrt_t1 = std::sqrt(tf_.constants().t1);

  // feasibility-aware central differences: one-sided at the cone boundary
  auto diff_q = [&](double q0, double b0, double f0) {
    const double h = cfg_.tol.grad_h;
    const double lim = b0 * sqrt_t1;
    const double hp = std::min(h, std::max(lim - q0, 0.0));
    const double hm = std::min(h, std::max(q0 + lim, 0.0));
    if (hp <= 1e-14 && hm <= 1e-14) return 0.0;
    if (hp <= 1e-14) return (f0 - value_at(q0 - hm, b0)) / hm;
    if (hm <= 1e-14) return (value_at(q0 + hp, b0) - f0) / hp;
    return (value_at(q0 + hp, b0) - value_at(q0 - hm, b0)) / (hp + hm);
  };
  auto diff_beta = [&](double q0, double b0, double f0) {
    const double h = cfg_.tol.grad_h;
    const double lim = std::abs(q0) / sqrt_t1;
    const double hm = std::min(h, std::max(b0 - lim, 0.0));
    if (hm <= 1e-14) return (value_at(q0, b0 + h) - f0) / h;
    return (value_at(q0, b0 + h) - value_at(q0, b0 - hm)) / (h + hm);
  };

  double step_q = 0.25, step_b = 0.25;
  int iter = 0;
  double grad_norm = 0.0;
  double last_move = 1.0;
  for (; iter < cfg_.tol.max_qbeta_iterations; ++iter) {
    double moved = 0.0;
    const double f_start = f;

    const double gq = diff_q(q, beta, f);
    const double gb = diff_beta(q, beta, f);
    grad_norm = std::hypot(gq, gb);

    // joint projected-gradient step with Armijo backtracking
    {
      double s = std::max(step_q, step_b);
      bool accepted = false;
      for (int bt = 0; bt < 45 && !accepted; ++bt) {
        auto [qc, bc] = project(q - s * gq, beta - s * gb);
        const double dq = qc - q, db = bc - beta;
        const double move2 = dq * dq + db * db;
        if (move2 < 1e-32) break;
        const double fc = value_at(qc, bc);
        if (fc <= f - 1e-4 * move2 / s) {
          q = qc;
          beta = bc;
          f = fc;
          moved = std::max(moved, std::sqrt(move2));
          step_q = step_b = std::min(s * 1.8, 1e6);
          accepted = true;
        } else {
          s *= 0.5;
        }
      }
      if (!accepted) step_q = step_b = std::max(std::max(step_q, step_b) * 0.5, 1e-14);
    }

    // per-coordinate steps sharpen the tail of the descent; run them when
    // the joint step made little progress or periodically
    const bool coord_pass = moved < 0.25 * param_tol || iter % 4 == 3;
    for (int coord = 0; coord_pass && coord < 2; ++coord) {
      const double g = coord == 0 ? diff_q(q, beta, f) : diff_beta(q, beta, f);
      if (std::abs(g) < 1e-16) continue;
      double s = coord == 0 ? step_q : step_b;
      for (int bt = 0; bt < 45; ++bt) {
        const double qc = coord == 0 ? q - s * g : q;
        const double bc = coord == 0 ? beta : beta - s * g;
        auto [qp, bp] = project(qc, bc);
        const double dq = qp - q, db = bp - beta;
        const double move2 = dq * dq + db * db;
        if (move2 < 1e-32) break;
        const double fc = value_at(qp, bp);
        if (fc <= f - 1e-4 * move2 / s) {
          q = qp;
          beta = bp;
          f = fc;
          moved = std::max(moved, std::sqrt(move2));
          (coord == 0 ? step_q : step_b) = std::min(s * 1.8, 1e6);
          break;
        }
        s *= 0.5;
        (coord == 0 ? step_q : step_b) = s;
      }
    }

    last_move = moved;
    if (moved < 0.25 * param_tol &&
        std::abs(f_start - f) < cost_tol * std::max(1.0, std::abs(f)))
      break;
  }
  if (iter >= cfg_.tol.max_qbeta_iterations)
    throw MaxIterations("saddle (q, beta) descent exceeded its iteration budget");

  // derivative-free polish: exact golden line minimizations per coordinate,
  // robust when the strong-convexity constant (theta lambda min(mu1^2, 1))
  // is tiny
  auto golden_line = [&](int coord) {
    const double radius = std::max(16.0 * std::max(last_move, param_tol), 1e-4);
    double lo, hi;
    if (coord == 0) {
      lo = std::max(q - radius, -beta * sqrt_t1);
      hi = std::min(q + radius, beta * sqrt_t1);
    } else {
      lo = std::max(beta - radius, std::abs(q) / sqrt_t1);
      hi = beta + radius;
    }
    if (!(hi - lo > 1e-14)) return;
    auto fv = [&](double v) { return coord == 0 ? value_at(v, beta) : value_at(q, v); };
    double a = lo, b = hi;
    double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
    double f1 = fv(x1), f2 = fv(x2);
    while (b - a > 0.05 * param_tol) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kGolden * (b - a);
        f1 = fv(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kGolden * (b - a);
        f2 = fv(x2);
      }
    }
    const double v = 0.5 * (a + b);
    const double fnew = fv(v);
    if (fnew <= f) {
      (coord == 0 ? q : beta) = v;
      f = fnew;
    }
  };
  for (int sweep = 0; sweep < 2; ++sweep) {
    golden_line(0);
    golden_line(1);
  }

  warm_q_ = q;
  warm_beta_ = beta;
  QBetaResult res;
  res.q = q;
  res.beta = beta;
  res.value = f;
  res.iterations = iter;
  res.grad_norm = grad_norm;
  return res;
}

SaddleProblem::QBetaResult SaddleProblem::solve_qbeta(double vartheta) {
  return descend_qbeta(vartheta, cfg_.tol.param, cfg_.tol.cost);
}

double SaddleProblem::vartheta_objective(double vartheta, double param_tol, double cost_tol) {
  return descend_qbeta(vartheta, param_tol, cost_tol).value;
}

// Root of the strictly increasing map v -> d/dv E[M(V(v, q, beta); x Z)];
// pins the optimal vartheta at fixed (q, beta, x) far more precisely than
// nested line search on the noisy solve values can.
double SaddleProblem::stationary_vartheta(double v0, double q, double beta, double x) const {
  EnvelopeQuadrature quad = cfg_.quad;
  quad.order = envelope_order_;
  quad.refine = false;
  auto g = [&](double v) {
    return expected_moreau_dvartheta(cfg_.teacher, cfg_.loss, cfg_.moments, v, q, beta, x, quad);
  };
  double lo = v0, hi = v0;
  double glo = g(lo), ghi = glo;
  double h = 0.25;
  for (int i = 0; i < 80 && glo > 0.0; ++i, h *= 2.0) {
    lo -= h;
    glo = g(lo);
  }
  h = 0.25;
  for (int i = 0; i < 80 && ghi < 0.0; ++i, h *= 2.0) {
    hi += h;
    ghi = g(hi);
  }
  if (glo > 0.0 || ghi < 0.0) return v0;  // derivative vanishes identically
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

SaddleSolution SaddleProblem::solve() {
  const double target = cfg_.lambda;
  std::vector<double> ladder;
  if (target < cfg_.tol.continuation_start) {
    for (double l = cfg_.tol.continuation_start; l > target * (1.0 + 1e-12);
         l *= cfg_.tol.continuation_factor)
      ladder.push_back(l);
  }
  ladder.push_back(target);

  const bool mean_free = cfg_.moments.mean_zero();
  double vartheta = mean_free ? 0.0 : cfg_.init_vartheta;
  if (mode_ == EnvelopeMode::ClosedSquared)
    vartheta = mean_free ? 0.0 : labels_.y / cfg_.moments.mu0;

  SolverReport report;
  report.continuation_stages = static_cast<int>(ladder.size());

  calibrate_envelope_order(vartheta, 0.6, 0.8, 0.5);

  QBetaResult qb;
  for (std::size_t stage = 0; stage < ladder.size(); ++stage) {
    lambda_ = ladder[stage];
    const bool final_stage = stage + 1 == ladder.size();
    const double ptol = final_stage ? cfg_.tol.param : 1e-4;
    const double ctol = final_stage ? cfg_.tol.cost : 1e-6;

    if (mode_ == EnvelopeMode::ClosedSquared || mean_free) {
      qb = descend_qbeta(vartheta, ptol, ctol);
      continue;
    }

    // outer minimization over vartheta: coarse golden section to land in the
    // basin, then alternate with the envelope stationarity condition
    auto phi = [&](double v) {
      ++report.vartheta_evaluations;
      return vartheta_objective(v, std::max(ptol, 1e-5), std::max(ctol, 1e-7));
    };
    if (stage == 0) {
      double vm = vartheta;
      double fm = phi(vm);
      double h = std::max(0.5, 0.1 * std::abs(vm));
      double vl = vm - h, vh = vm + h;
      double fl = phi(vl), fh = phi(vh);
      while (fl < fm || fh < fm) {
        if (h > 1e6) throw BracketFailure("outer vartheta bracket failed to close");
        if (fl < fm) {
          vh = vm;
          fh = fm;
          vm = vl;
          fm = fl;
          h *= 2.0;
          vl = vm - h;
          fl = phi(vl);
        } else {
          vl = vm;
          fl = fm;
          vm = vh;
          fm = fh;
          h *= 2.0;
          vh = vm + h;
          fh = phi(vh);
        }
      }
      double x1 = vh - kGolden * (vh - vl);
      double x2 = vl + kGolden * (vh - vl);
      double f1 = phi(x1), f2 = phi(x2);
      while (vh - vl > 1e-2 * std::max(1.0, std::abs(vl) + std::abs(vh))) {
        if (f1 <= f2) {
          vh = x2;
          x2 = x1;
          f2 = f1;
          x1 = vh - kGolden * (vh - vl);
          f1 = phi(x1);
        } else {
          vl = x1;
          x1 = x2;
          f1 = f2;
          x2 = vl + kGolden * (vh - vl);
          f2 = phi(x2);
        }
      }
      vartheta = 0.5 * (vl + vh);
    }

    for (int it = 0; it < 16; ++it) {
      qb = descend_qbeta(vartheta, ptol, ctol);
      const InnerSup sup = inner_sup_t(vartheta, qb.q, qb.beta);
      const double x = sup.at_infinity ? 0.0 : tf_.t4(sup.t) / lambda_;
      const double next = stationary_vartheta(vartheta, qb.q, qb.beta, x);
      const double dv = std::abs(next - vartheta);
      vartheta = next;
      if (dv < (final_stage ? cfg_.tol.vartheta_tol : 1e-4) * std::max(1.0, std::abs(next)))
        break;
    }
    qb = descend_qbeta(vartheta, ptol, ctol);
  }

  const InnerSup sup = inner_sup_t(vartheta, qb.q, qb.beta);
  SaddleSolution sol;
  sol.q_star = qb.q;
  sol.beta_star = qb.beta;
  sol.vartheta_star = vartheta;
  sol.t_star = sup.t;
  sol.cost = sup.value;
  report.qbeta_iterations = qb.iterations;
  report.grad_norm = qb.grad_norm;
  report.boundary = sup.at_infinity;
  report.envelope_evaluations = envelope_evals_;
  report.t_bracket_lo = last_t_lo_;
  report.t_bracket_hi = last_t_hi_;
  report.envelope_order = envelope_order_;
  sol.report = report;
  return sol;
}

SaddleSolution solve_saddle(const SaddleConfig& cfg) {
  SaddleProblem problem(cfg);
  return problem.solve();
}

SaddleSolution solve_saddle_regression_closed(const SaddleConfig& cfg) {
  SaddleProblem problem(cfg, SaddleProblem::EnvelopeMode::ClosedSquared);
  return problem.solve();
}

}  // namespace rfasym
