#pragma once

#include <span>

#include "coda/oracle.hpp"
#include "coda/rng.hpp"

namespace coda {

// Auxiliary estimate z of the inner expectation E[g](input), corrected for the
// drift between consecutive inputs. prev_input is owned here so the caller
// cannot desynchronise it from z.
struct TrackerState {
  Vector z;
  Vector prev_input;
  double beta = 1.0;
  bool initialized = false;
};

// z = minibatch mean of g at input0 over n_samples draws; prev_input = input0.
TrackerState tracker_init(const Problem& problem, const Vector& input0, int n_samples, double beta,
                          Rng& rng);

// z <- (1 - beta)(z + g(curr; batch) - g(prev; batch)) + beta g(curr; batch),
// with one batch evaluating both inputs.
TrackerState tracker_step(const TrackerState& state, const Problem& problem,
                          const Vector& input_curr, std::span<const OracleSample> batch);
TrackerState tracker_step(const TrackerState& state, const Problem& problem,
                          const Vector& input_curr, int batch_M, Rng& rng);

// Uncorrected moving average z <- (1 - beta) z + beta g(curr; batch), the
// stochastic compositional gradient baseline.
TrackerState moving_average_step(const TrackerState& state, const Problem& problem,
                                 const Vector& input_curr, std::span<const OracleSample> batch);

// ||z - E[g](prev_input)||^2: after a step from input x^t, this is the tracking
// error of z^{t+1} against g(x^t).
double tracking_error(const TrackerState& state, const Problem& problem,
                      int mc_samples = kDefaultMonteCarloSamples);

// Epoch-refreshed recursive estimator: a running estimate g_run of E[g] that is
// re-anchored on a large batch every tau steps and otherwise updated with
// same-batch differences.
struct VrTrackerState {
  TrackerState base;
  Vector g_run;
  int steps_since_refresh = 0;
  int tau = 1;

  bool refresh_due() const { return steps_since_refresh == 0; }
};

VrTrackerState vr_tracker_from(TrackerState base, int tau);

// g_run = g(curr; batch) on a refresh step (steps_since_refresh == 0), else
// g_run += g(curr) - g(prev); then z = (1-beta)(z + g(curr) - g(prev)) + beta g_run.
// z mixes in the updated g_run, so a noiseless run tracks g(curr) exactly.
VrTrackerState vr_tracker_step(const VrTrackerState& state, const Problem& problem,
                               const Vector& input_curr, std::span<const OracleSample> batch);

// Holds q^t and q^{t-1} for the extrapolated dual gradient 2 q^t - q^{t-1}.
struct DualGradAccumulator {
  Vector q_curr;
  Vector q_prev;
};

struct DualAccumStep {
  DualGradAccumulator acc;
  Vector extrapolated;
};

// On refresh q_curr <- fresh; otherwise q_curr <- q_curr + fresh (an increment).
// Returns 2 q_curr - q_prev after shifting q_prev <- old q_curr.
DualAccumStep dual_accum_step(const DualGradAccumulator& acc, const Vector& fresh,
                              bool is_refresh);

}  // namespace coda
