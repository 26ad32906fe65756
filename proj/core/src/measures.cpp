#include "coda/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coda/errors.hpp"

namespace coda {

void InnerSolveSpec::validate() const {
  if (max_iters < 1) throw ParameterError("InnerSolveSpec: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ParameterError("InnerSolveSpec: tol must be > 0");
  if (restarts < 1) throw ParameterError("InnerSolveSpec: restarts must be >= 1");
}

namespace {

constexpr std::uint64_t kRestartSeed = 0x7265737461727473ull;

struct AscentResult {
  Vector y;
  bool converged = false;
  int iterations = 0;
};

AscentResult ascend(const Problem& problem, const Vector& x, Vector y, double step,
                    const InnerSolveSpec& spec) {
  const DomainSpec& dom = problem.domain_y();
  AscentResult out;
  for (int it = 0; it < spec.max_iters; ++it) {
    const Vector gy = full_gradient(problem, {x, y}).gy;
    Vector next = dom.project(y + step * gy);
    const double mapping = (next - y).norm() / step;
    y = std::move(next);
    out.iterations = it + 1;
    if (mapping <= spec.tol) {
      out.converged = true;
      break;
    }
  }
  out.y = std::move(y);
  return out;
}

double primal_step(const ProblemMeta& m) { return 1.0 / std::max(m.L, 1e-12); }

// Smoothness of Phi: L (1 + L / mu) in the strongly concave case.
double phi_smoothness(const ProblemMeta& m) {
  if (m.mu_sc_y > 0.0) return m.L + m.L * m.L / m.mu_sc_y;
  return m.L;
}

}  // namespace

PrimalValue primal_value(const Problem& problem, const Vector& x, const InnerSolveSpec& spec,
                         const Vector* y_init) {
  spec.validate();
  const auto& m = problem.meta();
  require_dim(x, m.d_x, "primal_value");
  const double step = primal_step(m);
  Rng rng = make_rng(kRestartSeed, Stream::Measurement);

  PrimalValue best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < spec.restarts; ++r) {
    Vector y0;
    if (r == 0) {
      y0 = y_init != nullptr ? problem.domain_y().project(*y_init) : problem.default_start().y;
    } else {
      y0 = problem.domain_y().sample(rng, m.d_y);
    }
    AscentResult run = ascend(problem, x, std::move(y0), step, spec);
    const double value = objective_value(problem, {x, run.y});
    if (value > best.value) {
      best.value = value;
      best.y_star = std::move(run.y);
      best.certified = run.converged;
      best.iterations = run.iterations;
    }
  }
  return best;
}

MeasureValue primal_grad_norm_sq(const Problem& problem, const Vector& x,
                                 const InnerSolveSpec& spec, const Vector* y_init) {
  if (!(problem.meta().mu_sc_y > 0.0)) {
    throw CapabilityError(problem.name() + ": primal gradient needs strong concavity in y");
  }
  const PrimalValue pv = primal_value(problem, x, spec, y_init);
  const Vector gx = full_gradient(problem, {x, pv.y_star}).gx;
  return {gx.squaredNorm(), pv.certified};
}

MoreauResult moreau_envelope(const Problem& problem, const Vector& x, double lambda,
                             const InnerSolveSpec& spec) {
  spec.validate();
  if (!(lambda > 0.0)) throw ParameterError("moreau_envelope: lambda must be > 0");
  const auto& m = problem.meta();
  if (!m.concave_in_y) {
    throw CapabilityError(problem.name() + ": Moreau envelope of Phi needs concavity in y");
  }
  require_dim(x, m.d_x, "moreau_envelope");
  const DomainSpec& dom = problem.domain_x();
  const double step = 1.0 / (phi_smoothness(m) + 1.0 / lambda);

  // The inner maximisation is solved tighter than the outer stopping rule.
  InnerSolveSpec inner = spec;
  inner.tol = spec.tol * 1e-2;

  Vector u = dom.project(x);
  Vector y_warm = problem.default_start().y;
  MoreauResult out;
  bool inner_ok = true;
  for (int it = 0; it < spec.max_iters; ++it) {
    const PrimalValue pv = primal_value(problem, u, inner, &y_warm);
    inner_ok = pv.certified;
    y_warm = pv.y_star;
    const Vector grad = full_gradient(problem, {u, pv.y_star}).gx + (u - x) / lambda;
    Vector next = dom.project(u - step * grad);
    const double mapping = (next - u).norm() / step;
    out.first_order_residual = mapping;
    if (mapping <= spec.tol) {
      out.certified = inner_ok;
      break;
    }
    u = std::move(next);
  }
  const PrimalValue at_hat = primal_value(problem, u, inner, &y_warm);
  out.x_hat = u;
  out.y_hat = at_hat.y_star;
  out.envelope = at_hat.value + (u - x).squaredNorm() / (2.0 * lambda);
  out.grad_norm_sq = (x - u).squaredNorm() / (lambda * lambda);
  out.certified = out.certified && at_hat.certified;
  return out;
}

MeasureValue moreau_grad_norm_sq(const Problem& problem, const Vector& x, double lambda,
                                 const InnerSolveSpec& spec) {
  const MoreauResult r = moreau_envelope(problem, x, lambda, spec);
  return {r.grad_norm_sq, r.certified};
}

double stationary_gap_sq(const Problem& problem, const PrimalDualPoint& point, double eta_x,
                         double eta_y, int mc_samples) {
  if (!(eta_x > 0.0) || !(eta_y > 0.0)) {
    throw ParameterError("stationary_gap_sq: stepsizes must be > 0");
  }
  const FullGradient g = full_gradient(problem, point, mc_samples);
  const Vector map_x = (point.x - problem.domain_x().project(point.x - eta_x * g.gx)) / eta_x;
  const Vector map_y = (point.y - problem.domain_y().project(point.y + eta_y * g.gy)) / eta_y;
  return map_x.squaredNorm() + map_y.squaredNorm();
}

double wcwc_stationarity_proxy(const Problem& problem, const PrimalDualPoint& point, double eta,
                               int mc_samples) {
  if (problem.meta().mode != CompositionMode::OnBoth) {
    throw ModeError("wcwc_stationarity_proxy: needs composition on both variables");
  }
  return stationary_gap_sq(problem, point, eta, eta, mc_samples);
}

double mvi_residual(const Problem& problem, const PrimalDualPoint& w_star, int n_probes, Rng& rng) {
  if (n_probes < 1) throw ParameterError("mvi_residual: n_probes must be >= 1");
  if (!problem.domain_x().bounded() || !problem.domain_y().bounded()) {
    throw CapabilityError("mvi_residual: domains must be bounded");
  }
  const auto& m = problem.meta();
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_probes; ++k) {
    const PrimalDualPoint w{problem.domain_x().sample(rng, m.d_x),
                            problem.domain_y().sample(rng, m.d_y)};
    const FullGradient g = full_gradient(problem, w);
    const double inner = g.gx.dot(w.x - w_star.x) - g.gy.dot(w.y - w_star.y);
    worst = std::min(worst, inner);
  }
  return worst;
}

void check_measure_plan(const MeasurePlan& plan, const ProblemMeta& meta) {
  if (plan.every < 1) throw ParameterError("MeasurePlan: every must be >= 1");
  if (plan.primal_grad && !(meta.mu_sc_y > 0.0)) {
    throw CapabilityError("measure primal_grad needs a strongly concave problem in y");
  }
  if (plan.moreau && !meta.concave_in_y) {
    throw CapabilityError("measure moreau needs a problem concave in y");
  }
  if (plan.wcwc_proxy && meta.mode != CompositionMode::OnBoth) {
    throw CapabilityError("measure wcwc_proxy needs composition on both variables");
  }
  if (plan.tracking_err && meta.mode == CompositionMode::None) {
    throw CapabilityError("measure tracking_err needs an inner map");
  }
}

}  // namespace coda
