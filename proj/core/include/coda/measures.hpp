#pragma once

#include <optional>

#include "coda/oracle.hpp"
#include "coda/rng.hpp"

namespace coda {

// Stopping rule for the deterministic inner solvers (max over y, proximal
// subproblems). Stops once the projected-gradient-mapping norm is <= tol.
struct InnerSolveSpec {
  int max_iters = 20000;
  double tol = 1e-10;
  int restarts = 1;

  void validate() const;
};

struct PrimalValue {
  double value = 0.0;
  Vector y_star;
  bool certified = false;
  int iterations = 0;
};

// Phi(x) = max_{y in Y} F(x, y) by projected gradient ascent with step 1/L.
// The first start is y_init (or the problem's default y); further restarts are
// random points of Y. Returns the best start; certified when its final
// projected-gradient norm is <= tol.
PrimalValue primal_value(const Problem& problem, const Vector& x, const InnerSolveSpec& spec,
                         const Vector* y_init = nullptr);

struct MeasureValue {
  double value = 0.0;
  bool certified = false;
};

// ||grad Phi(x)||^2 = ||grad_x F(x, y*(x))||^2. CapabilityError unless the
// problem is strongly concave in y.
MeasureValue primal_grad_norm_sq(const Problem& problem, const Vector& x,
                                 const InnerSolveSpec& spec, const Vector* y_init = nullptr);

struct MoreauResult {
  double grad_norm_sq = 0.0;  // ||x - x_hat||^2 / lambda^2
  double envelope = 0.0;      // Phi(x_hat) + ||x_hat - x||^2 / (2 lambda)
  Vector x_hat;
  Vector y_hat;  // maximiser of F(x_hat, .)
  // Norm of the projected-gradient mapping of the proximal subproblem at x_hat.
  double first_order_residual = 0.0;
  bool certified = false;
};

// Proximal point of Phi at x with parameter lambda (lambda < 1/rho of Phi is
// the caller's responsibility). CapabilityError unless F is concave in y.
MoreauResult moreau_envelope(const Problem& problem, const Vector& x, double lambda,
                             const InnerSolveSpec& spec);

MeasureValue moreau_grad_norm_sq(const Problem& problem, const Vector& x, double lambda,
                                 const InnerSolveSpec& spec);

// Squared norm of the stacked projected-gradient mapping
// ((x - P_X(x - eta_x grad_x F)) / eta_x ; (y - P_Y(y + eta_y grad_y F)) / eta_y).
double stationary_gap_sq(const Problem& problem, const PrimalDualPoint& point, double eta_x,
                         double eta_y, int mc_samples = kDefaultMonteCarloSamples);

// Proxy for distance to stationarity of F + indicator(X x Y) in the
// composition-on-both setting: the squared projected-gradient mapping at a
// common stepsize. It bounds the distance only up to a problem constant.
double wcwc_stationarity_proxy(const Problem& problem, const PrimalDualPoint& point, double eta,
                               int mc_samples = kDefaultMonteCarloSamples);

// min over n_probes random feasible points w of <V(w), w - w*> with
// V = (grad_x F, -grad_y F). Nonnegative certifies the Minty condition on the
// probe set. CapabilityError when a domain is unbounded.
double mvi_residual(const Problem& problem, const PrimalDualPoint& w_star, int n_probes, Rng& rng);

// Which diagnostics an algorithm run computes, and how often.
struct MeasurePlan {
  int every = 1;
  bool primal_grad = false;
  bool moreau = false;
  bool stationary_gap = false;
  bool wcwc_proxy = false;  // recorded in the stationary-gap column
  bool tracking_err = false;
  bool objective = false;
  double moreau_lambda = 0.0;  // 0 selects 1/(2L)
  double gap_eta_x = 0.0;      // 0 selects the algorithm's eta_x
  double gap_eta_y = 0.0;      // 0 selects the algorithm's eta_y
  double wcwc_eta = 0.0;       // 0 selects the algorithm's eta_x
  InnerSolveSpec inner;
  int mc_samples = kDefaultMonteCarloSamples;

  bool any() const {
    return primal_grad || moreau || stationary_gap || wcwc_proxy || tracking_err || objective;
  }
};

// Throws CapabilityError when a requested measure is undefined for the problem.
void check_measure_plan(const MeasurePlan& plan, const ProblemMeta& meta);

}  // namespace coda
