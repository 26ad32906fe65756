#include <cmath>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "coda/algorithms.hpp"
#include "coda/errors.hpp"
#include "coda/harness.hpp"
#include "coda/problems.hpp"
#include "test_support.hpp"

using namespace coda;
using coda::testing::identity_primal_spec;

namespace {

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

AlgoConfig small_config(int T, double eta = 0.05) {
  AlgoConfig c;
  c.T = T;
  c.eta_x = eta;
  c.eta_y = eta;
  c.beta = 0.5;
  c.batch_M = 4;
  c.batch_B = 4;
  c.z0_init_samples = 8;
  return c;
}

RunOptions with_iterates() {
  RunOptions o;
  o.keep_iterates = true;
  return o;
}

Matrix sym2() { return Matrix{{1.0, 0.2}, {0.2, 0.5}}; }
Matrix cpl2() { return Matrix{{0.3, -0.4}, {0.7, 0.1}}; }

// f(x, z) = x'Cz + 1/2 z'Az with g = identity on y, h = r = 0.
QuadCompositionalSpec identity_dual_spec(const Matrix& A, const Matrix& C, double sigma = 0.0) {
  QuadCompositionalSpec s;
  s.mode = CompositionMode::OnDual;
  s.d_x = C.rows();
  s.d_y = C.cols();
  s.A = A;
  s.B = Matrix::Identity(C.cols(), C.cols());
  s.C = C;
  s.mu_x = 0.0;
  s.mu_y = 0.0;
  s.noise_sigma = sigma;
  return s;
}

// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
  const boost::math::binomial dist(n, 0.5);
  return wins == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, wins - 1));
}

}  // namespace

// ---- reductions ----------------------------------------------------------------------------------

TEST(Reduction, CodaPrimalIsGdaWhenNoiselessIdentity) {
  const Matrix A = sym2(), C = cpl2();
  const auto p = make_quad(identity_primal_spec(A, C, 0.0, 0.0));
  AlgoConfig cfg = small_config(100);
  RunOptions o = with_iterates();
  o.start = PrimalDualPoint{Vector{{1.0, -0.5}}, Vector{{0.25, 2.0}}};
  const auto run = coda_primal(*p, cfg, o);
  Vector x = o.start->x, y = o.start->y;
  ASSERT_EQ(run.iterates.size(), 101u);
  for (int t = 0; t <= 100; ++t) {
    EXPECT_LE(max_abs_diff(run.iterates[t].x, x), 1e-12) << t;
    EXPECT_LE(max_abs_diff(run.iterates[t].y, y), 1e-12) << t;
    const Vector gx = A * x + C * y, gy = C.transpose() * x;
    x -= cfg.eta_x * gx;
    y += cfg.eta_y * gy;
  }
}

TEST(Reduction, CodaDualIsProjectedGdaWhenNoiselessIdentity) {
  const Matrix A = -Matrix::Identity(3, 3);
  const Matrix C{{0.3, -0.4, 0.2}, {0.7, 0.1, -0.6}};
  auto s = identity_dual_spec(A, C);
  s.domain_x = DomainSpec::box(2, -0.8, 0.8);
  const auto p = make_quad(s);
  AlgoConfig cfg = small_config(100, 0.1);
  RunOptions o = with_iterates();
  o.start = PrimalDualPoint{Vector{{0.5, -0.7}}, Vector{{1.0, 0.0, -1.0}}};
  const auto run = coda_dual(*p, cfg, o);
  Vector x = o.start->x, y = o.start->y;
  for (int t = 0; t <= 100; ++t) {
    EXPECT_LE(max_abs_diff(run.iterates[t].x, x), 1e-12) << t;
    EXPECT_LE(max_abs_diff(run.iterates[t].y, y), 1e-12) << t;
    const Vector gx = C * y, gy = C.transpose() * x + A * y;
    x = s.domain_x.project(x - cfg.eta_x * gx);
    y += cfg.eta_y * gy;
  }
}

TEST(Reduction, ZeroStepsizesFreezeEveryIterate) {
  const auto p = build_problem("quad_primal");
  AlgoConfig cfg = small_config(10, 0.0);
  const auto run = coda_primal(*p, cfg, with_iterates());
  const auto start = p->default_start();
  for (const auto& w : run.iterates) {
    EXPECT_EQ(w.x, start.x);
    EXPECT_EQ(w.y, start.y);
  }
}

TEST(Reduction, SgdaMatchesCodaPrimalWhenNoiselessIdentity) {
  const auto p = make_quad(identity_primal_spec(sym2(), cpl2(), 0.3, 1.0));
  for (double beta : {1.0, 0.5}) {
    AlgoConfig cfg = small_config(50);
    cfg.beta = beta;
    const auto a = coda_primal(*p, cfg, with_iterates());
    const auto b = sgda(*p, cfg, with_iterates());
    ASSERT_EQ(a.iterates.size(), b.iterates.size());
    for (std::size_t t = 0; t < a.iterates.size(); ++t) {
      if (beta == 1.0) {
        EXPECT_EQ(a.iterates[t].x, b.iterates[t].x) << t;
        EXPECT_EQ(a.iterates[t].y, b.iterates[t].y) << t;
      } else {
        EXPECT_LE(max_abs_diff(a.iterates[t].x, b.iterates[t].x), 1e-12) << t;
        EXPECT_LE(max_abs_diff(a.iterates[t].y, b.iterates[t].y), 1e-12) << t;
      }
    }
  }
}

TEST(Reduction, ScgdaWithBetaOneIsSgda) {
  const auto p = build_problem("quad_primal");
  AlgoConfig cfg = small_config(30);
  cfg.beta = 1.0;
  const auto a = scgda(*p, cfg, with_iterates());
  const auto b = sgda(*p, cfg, with_iterates());
  for (std::size_t t = 0; t < a.iterates.size(); ++t) {
    EXPECT_EQ(a.iterates[t].x, b.iterates[t].x) << t;
    EXPECT_EQ(a.iterates[t].y, b.iterates[t].y) << t;
  }
}

// ---- gating, accounting, feasibility --------------------------------------------------------------

TEST(Algorithms, ModeGateOverTheFullGrid) {
  Rng rng = make_rng(7, Stream::ProblemData);
  const CompositionMode modes[] = {CompositionMode::None, CompositionMode::OnPrimal, CompositionMode::OnDual,
                                   CompositionMode::OnBoth};
  for (const auto mode : modes) {
    const auto p = make_quad(random_quad_spec(mode, QuadRegime::ScSc, 2, 2, 0.1, rng));
    for (const auto kind : all_algos()) {
      const bool ok = required_mode(kind) == mode;
      AlgoConfig cfg = small_config(2);
      if (ok) {
        EXPECT_NO_THROW(run_algorithm(kind, *p, cfg)) << to_string(kind) << ' ' << to_string(mode);
      } else {
        EXPECT_THROW(run_algorithm(kind, *p, cfg), ModeError) << to_string(kind) << ' ' << to_string(mode);
      }
    }
    const auto s = p->default_start();
    const auto call_scsc = [&] { return coda_scsc(*p, s.x, s.y, 1, small_config(1)); };
    const auto call_plus = [&] { return coda_scsc_plus(*p, s.x, s.y, 1, small_config(1)); };
    if (mode == CompositionMode::OnBoth) {
      EXPECT_NO_THROW(call_scsc());
    } else {
      EXPECT_THROW(call_scsc(), ModeError);
    }
    if (mode == CompositionMode::OnPrimal) {
      EXPECT_NO_THROW(call_plus());
    } else {
      EXPECT_THROW(call_plus(), ModeError);
    }
  }
}

TEST(Algorithms, BudgetAccountingOnThreeStepTraces) {
  AlgoConfig cfg = small_config(3);
  cfg.batch_M = 5;
  cfg.batch_B = 7;
  cfg.z0_init_samples = 11;
  cfg.batch_Btau = 20;
  cfg.tau = 2;
  const auto samples = [](const RunResult& r) {
    std::vector<std::int64_t> s;
    for (const auto& rec : r.records) s.push_back(rec.samples_used);
    return s;
  };
  const auto primal = build_problem("quad_primal");
  const std::vector<std::int64_t> plain{11, 23, 35, 47};
  EXPECT_EQ(samples(coda_primal(*primal, cfg)), plain);
  EXPECT_EQ(samples(scgda(*primal, cfg)), plain);
  EXPECT_EQ(samples(sgda(*primal, cfg)), (std::vector<std::int64_t>{0, 12, 24, 36}));
  EXPECT_EQ(samples(coda_dual(*build_problem("quad_dual"), cfg)), plain);
  EXPECT_EQ(samples(coda_pd(*build_problem("quad_both"), cfg)), plain);
  // Three estimators per step at B_tau = 20 (refresh) or B = 7.
  EXPECT_EQ(samples(coda_primal_plus(*primal, cfg)), (std::vector<std::int64_t>{11, 71, 92, 152}));
  cfg.K = 2;
  cfg.reinit_tracker_each_round = true;
  EXPECT_EQ(samples(coda_pd(*build_problem("quad_both"), cfg)).back(), 11 + 11 + 6 * 12);
}

TEST(Algorithms, RecordScheduleFollowsEvery) {
  const auto p = build_problem("quad_primal");
  RunOptions o;
  o.measures.every = 4;
  o.measures.tracking_err = true;
  const auto run = coda_primal(*p, small_config(10), o);
  std::vector<std::int64_t> ts;
  for (const auto& r : run.records) ts.push_back(r.t);
  EXPECT_EQ(ts, (std::vector<std::int64_t>{0, 4, 8, 10}));
  for (const auto& r : run.records) EXPECT_TRUE(r.tracking_err_sq.has_value());
}

TEST(Algorithms, EveryIterateIsFeasibleOnEveryShippedProblem) {
  for (const auto& e : problem_registry()) {
    const auto p = e.make(e.defaults);
    for (const auto kind : all_algos()) {
      if (required_mode(kind) != p->meta().mode) continue;
      AlgoConfig cfg = small_config(15, 0.05);
      cfg.K = 2;
      cfg.tau = 3;
      cfg.batch_Btau = 8;
      const auto run = run_algorithm(kind, *p, cfg, with_iterates());
      ASSERT_FALSE(run.iterates.empty()) << e.name << ' ' << to_string(kind);
      for (const auto& w : run.iterates) {
        EXPECT_TRUE(p->domain_x().contains(w.x, 1e-10)) << e.name << ' ' << to_string(kind);
        EXPECT_TRUE(p->domain_y().contains(w.y, 1e-10)) << e.name << ' ' << to_string(kind);
      }
      EXPECT_TRUE(p->domain_x().contains(run.final.x, 1e-10)) << e.name << ' ' << to_string(kind);
      EXPECT_TRUE(p->domain_y().contains(run.final.y, 1e-10)) << e.name << ' ' << to_string(kind);
    }
  }
}

TEST(Algorithms, SeedDeterminism) {
  const auto p = build_problem("quad_primal");
  RunOptions o = with_iterates();
  o.measures.tracking_err = true;
  o.measures.objective = true;
  AlgoConfig cfg = small_config(40);
  cfg.seed = 99;
  for (const auto kind : {AlgoKind::CodaPrimal, AlgoKind::CodaPrimalPlus, AlgoKind::Scgda}) {
    const auto a = run_algorithm(kind, *p, cfg, o), b = run_algorithm(kind, *p, cfg, o);
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.final.x, b.final.x);
    EXPECT_EQ(a.sampled_index, b.sampled_index);
  }
  cfg.seed = 100;
  EXPECT_NE(coda_primal(*p, cfg, o).final.x, coda_primal(*p, small_config(40), o).final.x);
}

TEST(Algorithms, OutputIsTheSampledIterate) {
  const auto p = build_problem("quad_primal");
  AlgoConfig cfg = small_config(25);
  const auto run = coda_primal(*p, cfg, with_iterates());
  ASSERT_TRUE(run.sampled_index.has_value());
  const auto k = *run.sampled_index;
  ASSERT_GE(k, 1);
  ASSERT_LE(k, 25);
  EXPECT_EQ(run.final.x, run.iterates[static_cast<std::size_t>(k)].x);
}

// ---- proximal point outer loop --------------------------------------------------------------------

TEST(CodaPd, OutputWeightsHandValues) {
  const std::vector<double> want{0.16270045344786252, 0.2300931878702196, 0.2818054517861928,
                                 0.32540090689572504};
  const auto w = pd_output_weights(4, 0.5);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(w[k], want[k], 1e-15);
  EXPECT_THROW(pd_output_weights(0, 0.5), ParameterError);
}

TEST(CodaPd, OutputSamplingPassesChiSquare) {
  const auto w = pd_output_weights(4, 0.5);
  Rng rng = make_rng(2024, Stream::Output);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_index(w, rng))];
  double stat = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double e = n * w[k];
    stat += (counts[k] - e) * (counts[k] - e) / e;
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), stat));
  EXPECT_GT(p, 0.01) << "chi2 = " << stat;
}

TEST(CodaPd, SingleRoundOutputsItsLastIterate) {
  const auto p = build_problem("quad_both");
  AlgoConfig cfg = small_config(20);
  cfg.K = 1;
  const auto run = coda_pd(*p, cfg, with_iterates());
  EXPECT_EQ(run.sampled_index, 1);
  EXPECT_EQ(run.final.x, run.iterates.back().x);
  EXPECT_EQ(run.final.y, run.iterates.back().y);
}

TEST(CodaScsc, ZeroStepsReturnTheStart) {
  const auto p = build_problem("quad_both");
  const auto s = p->default_start();
  const auto w = coda_scsc(*p, s.x, s.y, 0, small_config(0));
  EXPECT_EQ(w.x, s.x);
  EXPECT_EQ(w.y, s.y);
  EXPECT_THROW(coda_scsc(*p, s.x, s.y, -1, small_config(0)), ParameterError);
}

TEST(CodaScsc, ZeroWeightWrapEqualsTheBase) {
  const auto base = build_problem("quad_both");
  const auto s = base->default_start();
  const ProximalWrap pk(base, s.x, s.y, 0.0, 0.0);
  const auto cfg = small_config(1);
  const auto a = coda_scsc(pk, s.x, s.y, 1, cfg), b = coda_scsc(*base, s.x, s.y, 1, cfg);
  EXPECT_LE(max_abs_diff(a.x, b.x), 1e-12);
  EXPECT_LE(max_abs_diff(a.y, b.y), 1e-12);
}

TEST(CodaScsc, BilinearProximalSubproblemConverges) {
  // F = x'y through g = identity on w = (x, y); F_k adds 1/2(|x - xk|^2 - |y - yk|^2).
  QuadCompositionalSpec s;
  s.mode = CompositionMode::OnBoth;
  s.d_x = 2;
  s.d_y = 2;
  s.A = Matrix::Zero(4, 4);
  s.A.topRightCorner(2, 2) = Matrix::Identity(2, 2);
  s.A.bottomLeftCorner(2, 2) = Matrix::Identity(2, 2);
  s.B = Matrix::Identity(4, 4);
  s.mu_x = 0.0;
  s.mu_y = 0.0;
  const auto base = make_quad(s);
  const Vector xk{{1.0, -1.0}}, yk{{0.5, 2.0}};
  const ProximalWrap pk(base, xk, yk, 1.0, 1.0);
  // Stationarity: y + (x - xk) = 0 and x - (y - yk) = 0.
  Matrix K(4, 4);
  K << Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), -Matrix::Identity(2, 2);
  Vector rhs(4);
  rhs << xk, -yk;
  const Vector w_star = K.partialPivLu().solve(rhs);
  const auto w = coda_scsc(pk, Vector::Zero(2), Vector::Zero(2), 5000, small_config(0, 0.01));
  EXPECT_LE((w.stacked() - w_star).norm(), 1e-3);
}

// ---- variance-reduced rounds ----------------------------------------------------------------------

namespace {

// The round with exact gradients: what the variance-reduced estimators
// telescope to on a noiseless problem.
PrimalDualPoint exact_plus_round(const Problem& p, Vector x, Vector y, int T, const AlgoConfig& cfg,
                                 std::vector<PrimalDualPoint>& path) {
  Rng r = make_rng(0, Stream::Probe);
  const Batch in = draw_batch(r, SampleKind::Inner, 1), out = draw_batch(r, SampleKind::Outer, 1);
  Vector q_prev;
  Vector sx = Vector::Zero(x.size()), sy = Vector::Zero(y.size());
  for (int t = 0; t < T; ++t) {
    const Vector z = p.inner_mean(x);
    const Vector q = f_grad2(p, z, y, out);
    if (q_prev.size() == 0) q_prev = q;
    const Vector y_next = p.domain_y().project(p.r_implicit_step(y + cfg.eta_y * (2 * q - q_prev), cfg.eta_y));
    q_prev = q;
    const Vector gx = chain_grad(p, x, 1, z, y_next, in, out) + h_grad(p, x);
    x = p.domain_x().project(x - cfg.eta_x * gx);
    y = y_next;
    path.push_back({x, y});
    sx += x;
    sy += y;
  }
  return {sx / T, sy / T};
}

}  // namespace

TEST(CodaScscPlus, NoiselessRoundMatchesExactGradients) {
  const auto p = build_problem("quad_primal", {{"noise_sigma", 0.0}});
  const auto s = p->default_start();
  for (int tau : {1, 3, 8}) {
    AlgoConfig cfg = small_config(0, 0.05);
    cfg.tau = tau;
    cfg.batch_Btau = 16;
    std::vector<PrimalDualPoint> path;
    const auto want = exact_plus_round(*p, s.x, s.y, 40, cfg, path);
    const auto got = coda_scsc_plus(*p, s.x, s.y, 40, cfg);
    EXPECT_LE(max_abs_diff(got.x, want.x), 1e-12) << tau;
    EXPECT_LE(max_abs_diff(got.y, want.y), 1e-12) << tau;

    cfg.T = 40;
    const auto run = coda_primal_plus(*p, cfg, with_iterates());
    ASSERT_EQ(run.iterates.size(), path.size() + 1);
    for (std::size_t t = 0; t < path.size(); ++t) {
      EXPECT_LE(max_abs_diff(run.iterates[t + 1].x, path[t].x), 1e-12) << tau << ' ' << t;
    }
  }
}

TEST(CodaScscPlus, NoiselessTrackerIsExactThroughout) {
  const auto p = build_problem("quad_ncsc", {{"noise_sigma", 0.0}});
  AlgoConfig cfg = small_config(30, 0.02);
  cfg.K = 3;
  cfg.tau = 4;
  cfg.mu_x = 2 * p->meta().L;
  RunOptions o;
  o.measures.tracking_err = true;
  for (const auto& r : coda_primal_plus(*p, cfg, o).records) EXPECT_LE(*r.tracking_err_sq, 1e-20) << r.t;
}

TEST(CodaPrimalPlus, EmptyRoundReturnsTheStart) {
  const auto p = build_problem("quad_primal");
  AlgoConfig cfg = small_config(0);
  cfg.K = 1;
  const auto run = coda_primal_plus(*p, cfg);
  EXPECT_EQ(run.final.x, p->default_start().x);
  EXPECT_EQ(run.final.y, p->default_start().y);
}

TEST(CodaPrimalPlus, DegenerateWrapIsTheRawRound) {
  const auto p = build_problem("quad_primal");
  AlgoConfig cfg = small_config(25);
  cfg.K = 1;
  cfg.mu_x = 0.0;
  cfg.tau = 4;
  cfg.batch_Btau = 32;
  const auto s = p->default_start();
  const auto a = coda_primal_plus(*p, cfg).final;
  const auto b = coda_scsc_plus(*p, s.x, s.y, cfg.T, cfg);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  const auto c = run_algorithm(AlgoKind::CodaScscPlus, *p, cfg).final;
  EXPECT_EQ(c.x, b.x);
}

TEST(CodaPrimalPlus, AugmentedConcaveOnlyProblem) {
  const auto base = build_problem("robust_weights");
  const auto& m = base->meta();
  const Vector y0 = Vector::Constant(m.d_y, 1.0 / static_cast<double>(m.d_y));
  const auto aug = augment_concavity(base, 0.3, m.L, m.D_Y, y0);
  AlgoConfig cfg = small_config(100, 0.5 / m.L);
  cfg.K = 5;
  cfg.mu_x = 2 * m.L;
  cfg.batch_B = 16;
  cfg.batch_Btau = 64;
  RunOptions o = with_iterates();
  o.start = PrimalDualPoint{Vector::Constant(m.d_x, 1.0), y0};
  const auto run = coda_primal_plus(*aug, cfg, o);
  for (const auto& w : run.iterates) EXPECT_LE((w.y - y0).norm(), m.D_Y + 1e-12);
  const double eta = 0.5 / m.L;
  EXPECT_LT(stationary_gap_sq(*base, run.final, eta, eta), 0.5 * stationary_gap_sq(*base, *o.start, eta, eta));
}

// ---- dual composition -----------------------------------------------------------------------------

TEST(CodaDual, HugeRegularizerShrinksThePrimalIterates) {
  const Matrix C{{0.3, -0.4}, {0.7, 0.1}};
  auto s = identity_dual_spec(-Matrix::Identity(2, 2), C, 0.1);
  s.domain_x = DomainSpec::ball(Vector::Zero(2), 1.0);
  const auto p = make_quad(s);
  AlgoConfig cfg = small_config(30);
  cfg.eta_x = 1e-7;
  cfg.alpha_schedule = {1e6};
  RunOptions o = with_iterates();
  o.start = PrimalDualPoint{Vector{{0.9, 0.3}}, Vector{{0.5, -0.5}}};
  const auto run = coda_dual(*p, cfg, o);
  for (std::size_t t = 2; t < run.iterates.size(); ++t) {
    EXPECT_LT(run.iterates[t].x.norm(), run.iterates[t - 1].x.norm()) << t;
  }
  EXPECT_LT(run.iterates.back().x.norm(), 0.1);
}

TEST(CodaDual, ScNcToyGapDecreases) {
  const auto p = build_problem("mixture_weights");
  AlgoConfig cfg = small_config(2000, 0.0);
  cfg.eta_x = 0.05;
  cfg.eta_y = 0.02;
  cfg.beta = 0.1;
  cfg.batch_M = 8;
  cfg.batch_B = 8;
  RunOptions o;
  o.measures.every = 20;
  o.measures.stationary_gap = true;
  o.measures.gap_eta_x = 0.05;
  o.measures.gap_eta_y = 0.05;
  const auto run = coda_dual(*p, cfg, o);
  const double first = window_mean(run.records, &IterationRecord::stationary_gap_sq, 0, 200);
  const double last = window_mean(run.records, &IterationRecord::stationary_gap_sq, 1800, 2000);
  EXPECT_LE(5.0 * last, first);
}

// ---- primal composition examples ------------------------------------------------------------------

TEST(CodaPrimal, NcScPrimalGradientDecreasesTenfold) {
  const auto p = build_problem("quad_ncsc");
  const auto& m = p->meta();
  const double kappa = m.L / m.mu_sc_y;
  AlgoConfig cfg = small_config(500);
  cfg.beta = 0.5;
  cfg.eta_y = 0.5 / m.L;
  cfg.eta_x = 0.5 / (kappa * kappa * m.L);
  cfg.batch_M = 16;
  cfg.batch_B = 16;
  RunOptions o;
  o.measures.primal_grad = true;
  o.start = PrimalDualPoint{Vector::Constant(m.d_x, 2.0), Vector::Zero(m.d_y)};
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto run = coda_primal(*p, cfg, o);
    first += window_mean(run.records, &IterationRecord::grad_norm_sq, 1, 50);
    last += window_mean(run.records, &IterationRecord::grad_norm_sq, 451, 500);
  }
  EXPECT_LE(10.0 * last, first);
}

TEST(CodaPrimal, AucToySmoke) {
  const auto p = build_problem("auc_toy");
  AlgoConfig cfg = small_config(2000, 0.05);
  cfg.beta = 0.5;
  cfg.batch_M = 16;
  cfg.batch_B = 16;
  const auto run = coda_primal(*p, cfg);
  const Eigen::Index d = 2;
  EXPECT_GE(training_auc(*p, run.final.x.head(d)), 0.95);
}

TEST(VrTracker, BeatsPlainTrackerAtMatchedBudget) {
  // Per-step cost 16 either way: (114 + 7 * 2) / 8 = 16.
  const int M = 16, tau = 8, B_tau = 114, B = 2, T = 200;
  const double beta = 0.5;
  const auto p = build_problem("quad_primal", {{"noise_sigma", 1.0}});
  const Vector v = Vector::Constant(p->meta().d_x, 0.01);
  int wins = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    Rng init = make_rng(s, Stream::TrackerInit), rp = make_rng(s, Stream::TrackerBatch),
        rv = make_rng(s, Stream::RefreshBatch);
    Vector x = Vector::Zero(p->meta().d_x);
    TrackerState plain = tracker_init(*p, x, 64, beta, init);
    VrTrackerState vr = vr_tracker_from(plain, tau);
    double e_plain = 0.0, e_vr = 0.0;
    for (int t = 0; t < T; ++t) {
      x += v;
      plain = tracker_step(plain, *p, x, M, rp);
      vr = vr_tracker_step(vr, *p, x, draw_batch(rv, SampleKind::Inner, vr.refresh_due() ? B_tau : B));
      e_plain += tracking_error(plain, *p);
      e_vr += tracking_error(vr.base, *p);
    }
    wins += e_vr <= e_plain;
  }
  EXPECT_LT(sign_test_p(wins, seeds), 0.05) << wins << " of " << seeds;
}
