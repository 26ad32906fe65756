#include "coda/tracking.hpp"

#include "coda/errors.hpp"

namespace coda {

namespace {

void require_ready(const TrackerState& state, const Problem& problem, const Vector& input,
                   const char* where) {
  if (!state.initialized) throw ParameterError(std::string(where) + ": tracker not initialized");
  require_dim(input, problem.meta().inner_input_dim(), where);
  require_dim(state.prev_input, problem.meta().inner_input_dim(), where);
  require_dim(state.z, problem.meta().d_z, where);
}

}  // namespace

TrackerState tracker_init(const Problem& problem, const Vector& input0, int n_samples, double beta,
                          Rng& rng) {
  if (n_samples < 1) throw ParameterError("tracker_init: n_samples must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("tracker_init: beta must lie in (0, 1]");
  const Batch batch = draw_batch(rng, SampleKind::Inner, n_samples);
  return TrackerState{g_value(problem, input0, batch), input0, beta, true};
}

TrackerState tracker_step(const TrackerState& state, const Problem& problem,
                          const Vector& input_curr, std::span<const OracleSample> batch) {
  require_ready(state, problem, input_curr, "tracker_step");
  const Vector g_curr = g_value(problem, input_curr, batch);
  const Vector g_prev = g_value(problem, state.prev_input, batch);
  TrackerState next = state;
  next.z = (1.0 - state.beta) * (state.z + g_curr - g_prev) + state.beta * g_curr;
  next.prev_input = input_curr;
  require_finite(next.z, "tracker_step");
  return next;
}

TrackerState tracker_step(const TrackerState& state, const Problem& problem,
                          const Vector& input_curr, int batch_M, Rng& rng) {
  const Batch batch = draw_batch(rng, SampleKind::Inner, batch_M);
  return tracker_step(state, problem, input_curr, batch);
}

TrackerState moving_average_step(const TrackerState& state, const Problem& problem,
                                 const Vector& input_curr, std::span<const OracleSample> batch) {
  require_ready(state, problem, input_curr, "moving_average_step");
  TrackerState next = state;
  next.z = (1.0 - state.beta) * state.z + state.beta * g_value(problem, input_curr, batch);
  next.prev_input = input_curr;
  require_finite(next.z, "moving_average_step");
  return next;
}

double tracking_error(const TrackerState& state, const Problem& problem, int mc_samples) {
  if (!state.initialized) throw ParameterError("tracking_error: tracker not initialized");
  return (state.z - inner_expectation(problem, state.prev_input, mc_samples)).squaredNorm();
}

VrTrackerState vr_tracker_from(TrackerState base, int tau) {
  if (tau < 1) throw ParameterError("vr_tracker_from: tau must be >= 1");
  Vector g_run = base.z;
  return VrTrackerState{std::move(base), std::move(g_run), 0, tau};
}

VrTrackerState vr_tracker_step(const VrTrackerState& state, const Problem& problem,
                               const Vector& input_curr, std::span<const OracleSample> batch) {
  require_ready(state.base, problem, input_curr, "vr_tracker_step");
  const double beta = state.base.beta;
  const Vector g_curr = g_value(problem, input_curr, batch);
  const Vector diff = g_curr - g_value(problem, state.base.prev_input, batch);

  VrTrackerState next = state;
  next.g_run = state.refresh_due() ? g_curr : Vector(state.g_run + diff);
  next.base.z = (1.0 - beta) * (state.base.z + diff) + beta * next.g_run;
  next.base.prev_input = input_curr;
  next.steps_since_refresh = (state.steps_since_refresh + 1) % state.tau;
  require_finite(next.base.z, "vr_tracker_step");
  require_finite(next.g_run, "vr_tracker_step");
  return next;
}

DualAccumStep dual_accum_step(const DualGradAccumulator& acc, const Vector& fresh,
                              bool is_refresh) {
  if (fresh.size() != acc.q_curr.size() || acc.q_prev.size() != acc.q_curr.size()) {
    throw ShapeError("dual_accum_step: dimension mismatch");
  }
  DualAccumStep out;
  out.acc.q_prev = acc.q_curr;
  out.acc.q_curr = is_refresh ? fresh : Vector(acc.q_curr + fresh);
  out.extrapolated = 2.0 * out.acc.q_curr - out.acc.q_prev;
  require_finite(out.extrapolated, "dual_accum_step");
  return out;
}

}  // namespace coda
