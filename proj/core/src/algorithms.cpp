#include "coda/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include "coda/errors.hpp"

namespace coda {

const char* to_string(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::CodaPrimal:
      return "coda_primal";
    case AlgoKind::CodaDual:
      return "coda_dual";
    case AlgoKind::CodaScsc:
      return "coda_scsc";
    case AlgoKind::CodaPd:
      return "coda_pd";
    case AlgoKind::CodaScscPlus:
      return "coda_scsc_plus";
    case AlgoKind::CodaPrimalPlus:
      return "coda_primal_plus";
    case AlgoKind::Sgda:
      return "sgda";
    case AlgoKind::Scgda:
      return "scgda";
  }
  return "unknown";
}

const std::vector<AlgoKind>& all_algos() {
  static const std::vector<AlgoKind> kinds = {
      AlgoKind::CodaPrimal,     AlgoKind::CodaDual,       AlgoKind::CodaScsc, AlgoKind::CodaPd,
      AlgoKind::CodaScscPlus,   AlgoKind::CodaPrimalPlus, AlgoKind::Sgda,     AlgoKind::Scgda};
  return kinds;
}

AlgoKind parse_algo(const std::string& name) {
  for (AlgoKind k : all_algos()) {
    if (name == to_string(k)) return k;
  }
  throw ParameterError("unknown algorithm '" + name + "'");
}

CompositionMode required_mode(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::CodaDual:
      return CompositionMode::OnDual;
    case AlgoKind::CodaScsc:
    case AlgoKind::CodaPd:
      return CompositionMode::OnBoth;
    default:
      return CompositionMode::OnPrimal;
  }
}

void check_mode(AlgoKind kind, const Problem& problem) {
  const CompositionMode need = required_mode(kind);
  if (problem.meta().mode != need) {
    throw ModeError(std::string(to_string(kind)) + " needs composition mode " + to_string(need) +
                    ", problem '" + problem.name() + "' has " + to_string(problem.meta().mode));
  }
}

std::vector<double> pd_output_weights(int K, double exponent) {
  if (K < 1) throw ParameterError("pd_output_weights: K must be positive");
  if (!std::isfinite(exponent)) throw ParameterError("pd_output_weights: non-finite exponent");
  std::vector<double> w(static_cast<std::size_t>(K));
  double total = 0.0;
  for (int k = 0; k < K; ++k) total += w[static_cast<std::size_t>(k)] = std::pow(k + 1.0, exponent);
  for (double& v : w) v /= total;
  return w;
}

int sample_index(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("sample_index: weights must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw ParameterError("sample_index: weights sum to zero");
  const double u = rng.uniform() * total;
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = static_cast<int>(i);
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Streams {
  explicit Streams(std::uint64_t seed)
      : init(make_rng(seed, Stream::TrackerInit)),
        tracker(make_rng(seed, Stream::TrackerBatch)),
        grad(make_rng(seed, Stream::GradientBatch)),
        output(make_rng(seed, Stream::Output)),
        refresh(make_rng(seed, Stream::RefreshBatch)) {}

  Rng init;
  Rng tracker;
  Rng grad;
  Rng output;
  Rng refresh;
};

// Appends a record at t = 0, every plan.every steps and at t = total. All
// measures are taken on the base problem, never on a proximal wrap.
class Recorder {
 public:
  Recorder(const Problem& base, const AlgoConfig& config, const RunOptions& options, std::int64_t total,
           RunResult& out)
      : base_(base), config_(config), options_(options), total_(total), out_(out), start_(Clock::now()) {
    const MeasurePlan& plan = options.measures;
    if (plan.every < 1) throw ParameterError("measure every must be positive");
    if (plan.stationary_gap && plan.wcwc_proxy) {
      throw ParameterError("stationary_gap and wcwc_proxy share one column; request one");
    }
    check_measure_plan(plan, base.meta());
  }

  void step(std::int64_t t, std::int64_t samples, const Vector& x, const Vector& y,
            const TrackerState* tracker) {
    if (options_.keep_iterates) out_.iterates.push_back({x, y});
    if (!(t == 0 || t == total_ || t % options_.measures.every == 0)) return;
    const MeasurePlan& plan = options_.measures;
    IterationRecord rec;
    rec.t = t;
    rec.samples_used = samples;
    if (plan.any()) {
      const PrimalDualPoint p{x, y};
      if (plan.objective) rec.objective = objective_value(base_, p, plan.mc_samples);
      if (plan.primal_grad) rec.grad_norm_sq = primal_grad_norm_sq(base_, x, plan.inner).value;
      if (plan.moreau) {
        const double lambda = plan.moreau_lambda > 0.0 ? plan.moreau_lambda : 0.5 / base_.meta().L;
        rec.moreau_grad_sq = moreau_grad_norm_sq(base_, x, lambda, plan.inner).value;
      }
      if (plan.stationary_gap) {
        const double ex = plan.gap_eta_x > 0.0 ? plan.gap_eta_x : config_.eta_x;
        const double ey = plan.gap_eta_y > 0.0 ? plan.gap_eta_y : config_.eta_y;
        rec.stationary_gap_sq = stationary_gap_sq(base_, p, ex, ey, plan.mc_samples);
      }
      if (plan.wcwc_proxy) {
        const double eta = plan.wcwc_eta > 0.0 ? plan.wcwc_eta : config_.eta_x;
        rec.stationary_gap_sq = wcwc_stationarity_proxy(base_, p, eta, plan.mc_samples);
      }
      if (plan.tracking_err && tracker != nullptr) {
        rec.tracking_err_sq = tracking_error(*tracker, base_, plan.mc_samples);
      }
    }
    if (options_.timing) {
      rec.wall_nanos =
          std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
    }
    record_append(out_, std::move(rec));
  }

 private:
  const Problem& base_;
  const AlgoConfig& config_;
  const RunOptions& options_;
  std::int64_t total_;
  RunResult& out_;
  Clock::time_point start_;
};

PrimalDualPoint start_point(const Problem& problem, const RunOptions& options) {
  PrimalDualPoint p = options.start ? *options.start : problem.default_start();
  require_dim(p.x, problem.meta().d_x, "start x");
  require_dim(p.y, problem.meta().d_y, "start y");
  require_finite(p.x, "start x");
  require_finite(p.y, "start y");
  return {problem.domain_x().project(p.x), problem.domain_y().project(p.y)};
}

std::shared_ptr<const Problem> borrow(const Problem& problem) {
  return std::shared_ptr<const Problem>(&problem, [](const Problem*) {});
}

void require_valid(AlgoKind kind, const Problem& problem, const AlgoConfig& config) {
  check_mode(kind, problem);
  config.validate();
}

// The gradient pair of one plain compositional step.
struct StepBatches {
  Batch inner;
  Batch outer;
};

StepBatches draw_pairs(Rng& rng, int n) {
  StepBatches b;
  b.inner = draw_batch(rng, SampleKind::Inner, n);
  b.outer = draw_batch(rng, SampleKind::Outer, n);
  return b;
}

enum class PrimalEstimator { Tracked, Plain, MovingAverage };

RunResult primal_family(PrimalEstimator estimator, const Problem& problem, const AlgoConfig& cfg,
                        const RunOptions& options) {
  RunResult out;
  Streams rs(cfg.seed);
  Recorder rec(problem, cfg, options, cfg.T, out);
  auto [x, y] = start_point(problem, options);
  std::int64_t samples = 0;
  TrackerState tr;
  // The plain estimator has no state; its reported z is the step's minibatch mean.
  const bool plain = estimator == PrimalEstimator::Plain;
  if (!plain) {
    tr = tracker_init(problem, x, cfg.z0_init_samples, cfg.beta, rs.init);
    samples += cfg.z0_init_samples;
  }
  const std::int64_t pick = cfg.T > 0 ? 1 + static_cast<std::int64_t>(rs.output.index(cfg.T)) : 0;
  out.final = {x, y};
  out.sampled_index = pick;
  rec.step(0, samples, x, y, plain ? nullptr : &tr);
  for (int t = 0; t < cfg.T; ++t) {
    switch (estimator) {
      case PrimalEstimator::Tracked:
        tr = tracker_step(tr, problem, x, cfg.batch_M, rs.tracker);
        break;
      case PrimalEstimator::Plain:
        tr = TrackerState{g_value(problem, x, draw_batch(rs.tracker, SampleKind::Inner, cfg.batch_M)), x,
                          1.0, true};
        break;
      case PrimalEstimator::MovingAverage:
        tr = moving_average_step(tr, problem, x, draw_batch(rs.tracker, SampleKind::Inner, cfg.batch_M));
        break;
    }
    const StepBatches b = draw_pairs(rs.grad, cfg.batch_B);
    const Vector gx = chain_grad(problem, x, 1, tr.z, y, b.inner, b.outer) + h_grad(problem, x);
    const Vector gy = f_grad2(problem, tr.z, y, b.outer) - r_grad(problem, y);
    x = problem.domain_x().project(x - cfg.eta_x * gx);
    y = problem.domain_y().project(y + cfg.eta_y * gy);
    samples += cfg.batch_M + cfg.batch_B;
    if (t + 1 == pick) out.final = {x, y};
    rec.step(t + 1, samples, x, y, &tr);
  }
  return out;
}

// T steps of the stacked-variable method on problem_k, updating (x, y) and the
// tracker in place.
void scsc_steps(const Problem& pk, Vector& x, Vector& y, TrackerState& tr, int T, const AlgoConfig& cfg,
                Streams& rs, std::int64_t& samples, std::int64_t t_offset, Recorder* rec) {
  const Eigen::Index dx = x.size();
  const Vector none;
  for (int t = 0; t < T; ++t) {
    const Vector w = PrimalDualPoint{x, y}.stacked();
    tr = tracker_step(tr, pk, w, cfg.batch_M, rs.tracker);
    const StepBatches b = draw_pairs(rs.grad, cfg.batch_B);
    const Vector gw = chain_grad(pk, w, 1, tr.z, none, b.inner, b.outer);
    const Vector gx = gw.head(dx) + h_grad(pk, x);
    const Vector gy = gw.tail(y.size()) - r_grad(pk, y);
    x = pk.domain_x().project(x - cfg.eta_x * gx);
    y = pk.domain_y().project(y + cfg.eta_y * gy);
    samples += cfg.batch_M + cfg.batch_B;
    if (rec) rec->step(t_offset + t + 1, samples, x, y, &tr);
  }
}

// T variance-reduced steps on problem_k. Returns the average iterate over
// t = 1..T, or the start when T = 0.
PrimalDualPoint scsc_plus_steps(const Problem& pk, Vector& x, Vector& y, TrackerState& tr, int T,
                                const AlgoConfig& cfg, Streams& rs, std::int64_t& samples,
                                std::int64_t t_offset, Recorder* rec) {
  if (T == 0) return {x, y};
  VrTrackerState vr = vr_tracker_from(tr, cfg.tau);
  Vector x_prev = x;
  Vector y_prev = y;
  DualGradAccumulator acc;
  Vector gx_prev;
  Vector sum_x = Vector::Zero(x.size());
  Vector sum_y = Vector::Zero(y.size());
  for (int t = 0; t < T; ++t) {
    const bool refresh = vr.refresh_due();
    const int n = refresh ? cfg.batch_Btau : cfg.batch_B;
    Rng& br = refresh ? rs.refresh : rs.grad;

    const Vector z_t = vr.base.z;
    const Batch zb = draw_batch(br, SampleKind::Inner, n);
    vr = vr_tracker_step(vr, pk, x, zb);
    const Vector& z_next = vr.base.z;

    const Batch yb = draw_batch(br, SampleKind::Outer, n);
    Vector fresh = f_grad2(pk, z_next, y, yb);
    if (!refresh) fresh -= f_grad2(pk, z_t, y_prev, yb);
    // q^{-1} = q^0 on the first step of a round.
    if (acc.q_curr.size() == 0) acc.q_curr = acc.q_prev = fresh;
    DualAccumStep ds = dual_accum_step(acc, fresh, refresh);
    acc = std::move(ds.acc);
    const Vector y_next =
        pk.domain_y().project(pk.r_implicit_step(y + cfg.eta_y * ds.extrapolated, cfg.eta_y));

    const StepBatches xb = draw_pairs(br, n);
    Vector gx = chain_grad(pk, x, 1, z_next, y_next, xb.inner, xb.outer);
    if (!refresh) gx += gx_prev - chain_grad(pk, x_prev, 1, z_t, y, xb.inner, xb.outer);
    gx_prev = gx;
    const Vector x_next = pk.domain_x().project(x - cfg.eta_x * (gx + h_grad(pk, x)));

    x_prev = x;
    y_prev = y;
    x = x_next;
    y = y_next;
    sum_x += x;
    sum_y += y;
    samples += 3 * static_cast<std::int64_t>(n);
    if (rec) rec->step(t_offset + t + 1, samples, x, y, &vr.base);
  }
  tr = vr.base;
  return {sum_x / T, sum_y / T};
}

}  // namespace

RunResult coda_primal(const Problem& problem, const AlgoConfig& config, const RunOptions& options) {
  require_valid(AlgoKind::CodaPrimal, problem, config);
  return primal_family(PrimalEstimator::Tracked, problem, config, options);
}

RunResult sgda(const Problem& problem, const AlgoConfig& config, const RunOptions& options) {
  require_valid(AlgoKind::Sgda, problem, config);
  return primal_family(PrimalEstimator::Plain, problem, config, options);
}

RunResult scgda(const Problem& problem, const AlgoConfig& config, const RunOptions& options) {
  require_valid(AlgoKind::Scgda, problem, config);
  return primal_family(PrimalEstimator::MovingAverage, problem, config, options);
}

RunResult coda_dual(const Problem& problem, const AlgoConfig& cfg, const RunOptions& options) {
  require_valid(AlgoKind::CodaDual, problem, cfg);
  RunResult out;
  Streams rs(cfg.seed);
  Recorder rec(problem, cfg, options, cfg.T, out);
  auto [x, y] = start_point(problem, options);
  TrackerState tr = tracker_init(problem, y, cfg.z0_init_samples, cfg.beta, rs.init);
  std::int64_t samples = cfg.z0_init_samples;
  const std::int64_t pick = cfg.T > 0 ? 1 + static_cast<std::int64_t>(rs.output.index(cfg.T)) : 0;
  out.final = {x, y};
  out.sampled_index = pick;
  rec.step(0, samples, x, y, &tr);
  for (int t = 0; t < cfg.T; ++t) {
    tr = tracker_step(tr, problem, y, cfg.batch_M, rs.tracker);
    const StepBatches b = draw_pairs(rs.grad, cfg.batch_B);
    const Vector gx = f_grad1(problem, x, tr.z, b.outer) + h_grad(problem, x) + cfg.alpha_at(t) * x;
    const Vector gy = chain_grad(problem, y, 2, x, tr.z, b.inner, b.outer) - r_grad(problem, y);
    x = problem.domain_x().project(x - cfg.eta_x * gx);
    y = problem.domain_y().project(y + cfg.eta_y * gy);
    samples += cfg.batch_M + cfg.batch_B;
    if (t + 1 == pick) out.final = {x, y};
    rec.step(t + 1, samples, x, y, &tr);
  }
  return out;
}

namespace {

// Proximal outer loop with anchor weight `weight`; weight 0 with K = 1 is a
// plain stacked-variable run on the problem itself.
RunResult pd_rounds(const Problem& problem, const AlgoConfig& cfg, const RunOptions& options, double weight) {
  RunResult out;
  Streams rs(cfg.seed);
  Recorder rec(problem, cfg, options, static_cast<std::int64_t>(cfg.K) * cfg.T, out);
  auto [x, y] = start_point(problem, options);
  auto stacked = [&] { return PrimalDualPoint{x, y}.stacked(); };
  TrackerState tr = tracker_init(problem, stacked(), cfg.z0_init_samples, cfg.beta, rs.init);
  std::int64_t samples = cfg.z0_init_samples;
  rec.step(0, samples, x, y, &tr);
  const auto base = borrow(problem);
  std::vector<PrimalDualPoint> outer;
  for (int k = 0; k < cfg.K; ++k) {
    if (k > 0 && cfg.reinit_tracker_each_round) {
      tr = tracker_init(problem, stacked(), cfg.z0_init_samples, cfg.beta, rs.init);
      samples += cfg.z0_init_samples;
    }
    const ProximalWrap pk(base, x, y, weight, weight);
    scsc_steps(pk, x, y, tr, cfg.T, cfg, rs, samples, static_cast<std::int64_t>(k) * cfg.T, &rec);
    outer.push_back({x, y});
  }
  const int k_star = sample_index(pd_output_weights(cfg.K, cfg.theta_exponent), rs.output);
  out.final = outer[static_cast<std::size_t>(k_star)];
  out.sampled_index = k_star + 1;
  return out;
}

}  // namespace

RunResult coda_pd(const Problem& problem, const AlgoConfig& cfg, const RunOptions& options) {
  require_valid(AlgoKind::CodaPd, problem, cfg);
  return pd_rounds(problem, cfg, options, 1.0 / cfg.gamma);
}

RunResult coda_primal_plus(const Problem& problem, const AlgoConfig& cfg, const RunOptions& options) {
  require_valid(AlgoKind::CodaPrimalPlus, problem, cfg);
  RunResult out;
  Streams rs(cfg.seed);
  Recorder rec(problem, cfg, options, static_cast<std::int64_t>(cfg.K) * cfg.T, out);
  auto [x, y] = start_point(problem, options);
  TrackerState tr = tracker_init(problem, x, cfg.z0_init_samples, cfg.beta, rs.init);
  std::int64_t samples = cfg.z0_init_samples;
  rec.step(0, samples, x, y, &tr);
  const auto base = borrow(problem);
  for (int k = 0; k < cfg.K; ++k) {
    if (k > 0 && cfg.reinit_tracker_each_round) {
      tr = tracker_init(problem, x, cfg.z0_init_samples, cfg.beta, rs.init);
      samples += cfg.z0_init_samples;
    }
    const ProximalWrap pk(base, x, y, cfg.mu_x, 0.0);
    const PrimalDualPoint avg =
        scsc_plus_steps(pk, x, y, tr, cfg.T, cfg, rs, samples, static_cast<std::int64_t>(k) * cfg.T, &rec);
    x = avg.x;
    y = avg.y;
  }
  out.final = {x, y};
  return out;
}

PrimalDualPoint coda_scsc(const Problem& problem_k, const Vector& x0, const Vector& y0, int T,
                          const AlgoConfig& config) {
  require_valid(AlgoKind::CodaScsc, problem_k, config);
  if (T < 0) throw ParameterError("coda_scsc: T must be nonnegative");
  Streams rs(config.seed);
  RunOptions opts;
  opts.start = PrimalDualPoint{x0, y0};
  auto [x, y] = start_point(problem_k, opts);
  TrackerState tr = tracker_init(problem_k, PrimalDualPoint{x, y}.stacked(), config.z0_init_samples,
                                 config.beta, rs.init);
  std::int64_t samples = 0;
  scsc_steps(problem_k, x, y, tr, T, config, rs, samples, 0, nullptr);
  return {x, y};
}

PrimalDualPoint coda_scsc_plus(const Problem& problem_k, const Vector& x0, const Vector& y0, int T,
                               const AlgoConfig& config) {
  require_valid(AlgoKind::CodaScscPlus, problem_k, config);
  if (T < 0) throw ParameterError("coda_scsc_plus: T must be nonnegative");
  Streams rs(config.seed);
  RunOptions opts;
  opts.start = PrimalDualPoint{x0, y0};
  auto [x, y] = start_point(problem_k, opts);
  TrackerState tr = tracker_init(problem_k, x, config.z0_init_samples, config.beta, rs.init);
  std::int64_t samples = 0;
  return scsc_plus_steps(problem_k, x, y, tr, T, config, rs, samples, 0, nullptr);
}

RunResult run_algorithm(AlgoKind kind, const Problem& problem, const AlgoConfig& config,
                        const RunOptions& options) {
  switch (kind) {
    case AlgoKind::CodaPrimal:
      return coda_primal(problem, config, options);
    case AlgoKind::CodaDual:
      return coda_dual(problem, config, options);
    case AlgoKind::CodaPd:
      return coda_pd(problem, config, options);
    case AlgoKind::CodaPrimalPlus:
      return coda_primal_plus(problem, config, options);
    case AlgoKind::Sgda:
      return sgda(problem, config, options);
    case AlgoKind::Scgda:
      return scgda(problem, config, options);
    case AlgoKind::CodaScsc: {
      require_valid(kind, problem, config);
      AlgoConfig one = config;
      one.K = 1;
      return pd_rounds(problem, one, options, 0.0);
    }
    case AlgoKind::CodaScscPlus: {
      check_mode(kind, problem);
      AlgoConfig one = config;
      one.K = 1;
      return coda_primal_plus(problem, one, options);
    }
  }
  throw ParameterError("run_algorithm: unknown algorithm");
}

}  // namespace coda
