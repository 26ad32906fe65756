#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "coda/errors.hpp"
#include "coda/measures.hpp"
#include "coda/oracle.hpp"
#include "coda/problems.hpp"
#include "test_support.hpp"

using namespace coda;
using coda::testing::load_quad_fixture;

namespace {

Batch tokens(std::uint64_t seed, SampleKind kind, int n) {
  Rng r = make_rng(seed, Stream::GradientBatch);
  return draw_batch(r, kind, n);
}

}  // namespace

// ---- minibatch oracles ----------------------------------------------------------------

TEST(Oracle, AffineNoiseMeanConverges) {
  QuadCompositionalSpec s = coda::testing::identity_primal_spec(Matrix::Identity(3, 3), Matrix::Identity(3, 2),
                                                                1.0, 1.0, 0.7);
  s.B = Matrix{{1.0, 2.0, 0.0}, {0.0, -1.0, 0.5}, {0.3, 0.0, 1.0}};
  const auto p = make_quad(s);
  const Vector x{{0.4, -1.0, 2.0}};
  const int n = 100000;
  const Vector mean = g_value(*p, x, tokens(1, SampleKind::Inner, n));
  const Vector want = s.B * x;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mean(i), want(i), 3.0 * 0.7 / std::sqrt(n));
}

TEST(Oracle, JacobianMatchesFiniteDifferencesAtSameBatch) {
  const auto p = build_problem("auc_toy");
  const Batch b = tokens(2, SampleKind::Inner, 8);
  const Vector x = Vector::LinSpaced(p->meta().d_x, -0.5, 0.7);
  const Matrix J = g_jacobian(*p, x, b);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6;
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vector col = (g_value(*p, xp, b) - g_value(*p, xm, b)) / (2 * h);
    EXPECT_LE((col - J.col(j)).norm(), 1e-5 * std::max(1.0, J.col(j).norm()));
  }
}

TEST(Oracle, OuterGradientsMatchFiniteDifferences) {
  const auto f = load_quad_fixture("quad_ncsc.fixture", CompositionMode::OnPrimal);
  QuadCompositionalSpec s = f.spec;
  s.noise_sigma = 0.0;
  const auto p = make_quad(s);
  const Batch b = tokens(3, SampleKind::Outer, 4);
  const Vector z = Vector::LinSpaced(4, 0.1, 0.9), y = Vector::LinSpaced(4, -1, 1);
  const Vector g1 = f_grad1(*p, z, y, b), g2 = f_grad2(*p, z, y, b);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    Vector e = Vector::Zero(4);
    e(i) = h;
    EXPECT_NEAR((f_value(*p, z + e, y, b) - f_value(*p, z - e, y, b)) / (2 * h), g1(i), 1e-5 * (1 + std::abs(g1(i))));
    EXPECT_NEAR((f_value(*p, z, y + e, b) - f_value(*p, z, y - e, b)) / (2 * h), g2(i), 1e-5 * (1 + std::abs(g2(i))));
  }
}

TEST(Oracle, HandEvaluatedRegularizerGradient) {
  // r(y) = 1/2 y'Dy, D = diag(1, 3): the None-mode quad with A = 0 and a
  // per-coordinate mu cannot express D, so evaluate through a wrap-free
  // constraint-free problem: the mixture toy's h is lambda a'diag(m)a.
  MixtureWeightsSpec s;
  s.H_target = Matrix::Identity(1, 1);
  s.target_center = Vector::Zero(1);
  s.H = {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  s.centers = {Vector::Zero(1), Vector::Zero(1)};
  s.m = Vector{{1.0, 3.0}};
  s.lambda = 0.5;
  const auto p = make_mixture_weights(s);
  const Vector g = h_grad(*p, Vector{{1.0, 1.0}});
  EXPECT_DOUBLE_EQ(g(0), 1.0);
  EXPECT_DOUBLE_EQ(g(1), 3.0);
}

TEST(Oracle, BatchOrderDoesNotChangeMean) {
  const auto p = build_problem("robust_weights");
  Batch b = tokens(4, SampleKind::Inner, 16);
  const Vector x = Vector::Constant(p->meta().d_x, 0.3);
  const Vector a = g_value(*p, x, b);
  std::reverse(b.begin(), b.end());
  EXPECT_LE((a - g_value(*p, x, b)).norm(), 1e-14);
}

TEST(Oracle, NoiselessInnerIsBatchIndependentBitwise) {
  for (const char* name : {"quad_primal", "quad_both", "robust_weights", "mixture_weights", "constraint_penalty",
                           "wcwc_toy"}) {
    const auto p = build_problem(name, {{"noise_sigma", 0.0}});
    const Vector in = Vector::Constant(p->meta().inner_input_dim(), 0.2);
    EXPECT_EQ(g_value(*p, in, tokens(5, SampleKind::Inner, 3)), g_value(*p, in, tokens(6, SampleKind::Inner, 7)))
        << name;
  }
}

TEST(Oracle, EmptyBatchAndModeErrors) {
  const auto p = build_problem("quad_both");
  const Vector w = Vector::Zero(p->meta().inner_input_dim());
  EXPECT_THROW(g_value(*p, w, Batch{}), ParameterError);
  EXPECT_THROW(f_grad2(*p, w, Vector{}, tokens(1, SampleKind::Outer, 2)), ModeError);
  EXPECT_THROW(g_value(*p, Vector::Zero(w.size() + 1), tokens(1, SampleKind::Inner, 2)), ShapeError);
}

TEST(Oracle, FullGradientMatchesFiniteDifferencesOfObjective) {
  const auto p = build_problem("quad_ncsc");
  const PrimalDualPoint w{Vector::LinSpaced(4, -1, 1), Vector::LinSpaced(4, 0.5, -0.5)};
  const FullGradient g = full_gradient(*p, w);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    PrimalDualPoint a = w, b = w;
    a.x(i) += h;
    b.x(i) -= h;
    EXPECT_NEAR((objective_value(*p, a) - objective_value(*p, b)) / (2 * h), g.gx(i), 1e-5 * (1 + std::abs(g.gx(i))));
    a = w;
    b = w;
    a.y(i) += h;
    b.y(i) -= h;
    EXPECT_NEAR((objective_value(*p, a) - objective_value(*p, b)) / (2 * h), g.gy(i), 1e-5 * (1 + std::abs(g.gy(i))));
  }
}

TEST(Oracle, MonteCarloFallbackNeedsSamples) {
  const auto p = build_problem("auc_toy");
  const PrimalDualPoint w = p->default_start();
  EXPECT_NO_THROW(full_gradient(*p, w));
  const auto pc = build_problem("quad_primal");
  EXPECT_NO_THROW(full_gradient(*pc, pc->default_start(), 0));
}

// ---- gradient checking ------------------------------------------------------------------

TEST(GradientCheck, EveryRegisteredProblemPasses) {
  for (const auto& e : problem_registry()) {
    const auto p = e.make(e.defaults);
    const auto rep = check_gradients(*p, 20, 1e-4, 0);
    EXPECT_TRUE(rep.passed) << rep.to_string();
  }
}

TEST(GradientCheck, DetectsABrokenDerivative) {
  // A wrap adds h = w/2 |x - a|^2; lying about its gradient must be caught.
  struct Broken : public Problem {
    ProblemPtr base = build_problem("quad_primal");
    std::string name() const override { return "broken"; }
    const ProblemMeta& meta() const override { return base->meta(); }
    const DomainSpec& domain_x() const override { return base->domain_x(); }
    const DomainSpec& domain_y() const override { return base->domain_y(); }
    Vector inner(const Vector& v, std::uint64_t d) const override { return base->inner(v, d); }
    Matrix inner_jacobian(const Vector& v, std::uint64_t d) const override {
      return 1.01 * base->inner_jacobian(v, d);
    }
    Vector inner_mean(const Vector& v) const override { return base->inner_mean(v); }
    Matrix inner_mean_jacobian(const Vector& v) const override { return base->inner_mean_jacobian(v); }
    double outer_value(const Vector& a, const Vector& b, std::uint64_t d) const override {
      return base->outer_value(a, b, d);
    }
    Vector outer_grad1(const Vector& a, const Vector& b, std::uint64_t d) const override {
      return base->outer_grad1(a, b, d);
    }
    Vector outer_grad2(const Vector& a, const Vector& b, std::uint64_t d) const override {
      return base->outer_grad2(a, b, d);
    }
    double outer_mean_value(const Vector& a, const Vector& b) const override { return base->outer_mean_value(a, b); }
    Vector outer_mean_grad1(const Vector& a, const Vector& b) const override { return base->outer_mean_grad1(a, b); }
    Vector outer_mean_grad2(const Vector& a, const Vector& b) const override { return base->outer_mean_grad2(a, b); }
    double h_value(const Vector& x) const override { return base->h_value(x); }
    Vector h_grad(const Vector& x) const override { return base->h_grad(x); }
    double r_value(const Vector& y) const override { return base->r_value(y); }
    Vector r_grad(const Vector& y) const override { return base->r_grad(y); }
  };
  const auto rep = check_gradients(Broken{}, 5, 1e-4, 0);
  EXPECT_FALSE(rep.passed);
  EXPECT_THROW(check_gradients(Broken{}, 0, 1e-4, 0), ParameterError);
}

// ---- quadratic ----------------------------------------------------------------------------

TEST(Quad, SymmetricBilinearSaddleAtOrigin) {
  QuadCompositionalSpec s =
      coda::testing::identity_primal_spec(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 1.0, 1.0);
  const auto w = make_quad_saddle(s);
  EXPECT_LE(w.x.norm(), 1e-15);
  EXPECT_LE(w.y.norm(), 1e-15);
}

// Saddles frozen by tests/oracles/quad_fixture_oracle.py (numpy solve).
TEST(Quad, FixtureSaddlesMatchOracle) {
  for (auto [file, mode] : {std::pair{"quad_scsc.fixture", CompositionMode::OnBoth},
                            std::pair{"quad_ncsc.fixture", CompositionMode::OnPrimal}}) {
    const auto f = load_quad_fixture(file, mode);
    const auto w = make_quad_saddle(f.spec);
    EXPECT_LE((w.x - f.saddle.x).lpNorm<Eigen::Infinity>(), 1e-12) << file;
    EXPECT_LE((w.y - f.saddle.y).lpNorm<Eigen::Infinity>(), 1e-12) << file;
    const auto p = make_quad(f.spec);
    ASSERT_TRUE(p->meta().has_true_saddle);
    const auto fg = full_gradient(*p, w);
    EXPECT_LE(fg.gx.norm() + fg.gy.norm(), 1e-12) << file;
  }
}

TEST(Quad, SaddleErrors) {
  auto s = coda::testing::identity_primal_spec(Matrix::Zero(2, 2), Matrix::Zero(2, 2), 0.0, 1.0);
  EXPECT_THROW(make_quad_saddle(s), DegeneracyError);
  s = coda::testing::identity_primal_spec(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0, 1.0);
  s.domain_x = DomainSpec::box(2, -1, 1);
  EXPECT_THROW(make_quad_saddle(s), ParameterError);
  s = coda::testing::identity_primal_spec(Matrix::Identity(2, 2), Matrix::Identity(3, 2), 1.0, 1.0);
  EXPECT_THROW(make_quad(s), ShapeError);
}

TEST(Quad, CurvatureMetadataIsHonest) {
  Rng probe = make_rng(0, Stream::Probe);
  for (const char* name : {"quad_primal", "quad_ncsc", "quad_dual", "quad_both"}) {
    const auto p = build_problem(name);
    const auto& m = p->meta();
    const PrimalDualPoint w = p->default_start();
    const double h = 1e-4;
    for (int k = 0; k < 100; ++k) {
      Vector u(m.d_x);
      for (auto& e : u) e = probe.normal();
      u.normalize();
      PrimalDualPoint a = w, b = w;
      a.x += h * u;
      b.x -= h * u;
      const double curv = (objective_value(*p, a) - 2 * objective_value(*p, w) + objective_value(*p, b)) / (h * h);
      if (m.mu_sc_x > 0) EXPECT_GE(curv, m.mu_sc_x - 1e-6) << name;
      EXPECT_LE(std::abs(curv), m.L + 1e-6) << name;
    }
  }
}

TEST(Quad, RandomNcScIsNonconvexWithConvexPrimal) {
  const auto p = build_problem("quad_ncsc");
  EXPECT_GT(p->meta().rho_weak, 0.0);
  EXPECT_GT(p->meta().mu_sc_y, 0.0);
  EXPECT_TRUE(p->meta().has_true_saddle);
}

// ---- AUC toy ------------------------------------------------------------------------------

TEST(AucToy, ClassFractionsAndLabels) {
  Rng r = make_rng(1, Stream::ProblemData);
  AucToySpec s;
  s.n = 401;
  const auto p = make_auc_toy(s, r);
  EXPECT_EQ(p->meta().d_x, 4);
  EXPECT_EQ(p->meta().d_y, 1);
  EXPECT_NEAR(p->meta().mu_sc_y, 2 * 0.1 * 0.9, 0.01);
  Rng r2 = make_rng(1, Stream::ProblemData);
  s.imratio = 1.0;
  EXPECT_THROW(make_auc_toy(s, r2), ParameterError);
  s.imratio = 0.001;
  EXPECT_THROW(make_auc_toy(s, r2), DataError);
}

TEST(AucToy, ScoresSeparateClassesAlongMeanDirection) {
  const auto p = build_problem("auc_toy");
  EXPECT_GT(training_auc(*p, Vector::Ones(2)), 0.99);
  EXPECT_LT(training_auc(*p, -Vector::Ones(2)), 0.01);
  EXPECT_DOUBLE_EQ(training_auc(*p, Vector::Zero(2)), 0.5);
  EXPECT_THROW(training_auc(*build_problem("quad_primal"), Vector::Ones(2)), ParameterError);
}

// ---- robust weights -------------------------------------------------------------------------

namespace {

ProblemPtr two_task_robust() {
  RobustWeightsSpec s;
  s.H = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 3.0)};
  s.centers = {Vector::Constant(1, -1.0), Vector::Constant(1, 2.0)};
  s.eta = 0.1;
  return make_robust_weights(s);
}

}  // namespace

// Values frozen from tests/oracles/problems_oracle.py (brute-force grid).
TEST(RobustWeights, WorstCaseWeightMatchesGridOracle) {
  const auto p = two_task_robust();
  InnerSolveSpec spec;
  struct Case {
    double w, phi, weight0;
  };
  for (const Case& c : {Case{-2.0, 11.76, 0.0}, Case{0.0, 2.94, 0.0}, Case{0.5, 1.65375, 0.0}, Case{3.0, 6.48, 1.0}}) {
    const auto v = primal_value(*p, Vector::Constant(1, c.w), spec);
    EXPECT_NEAR(v.value, c.phi, 1e-9) << c.w;
    EXPECT_NEAR(v.y_star(0), c.weight0, 1e-9) << c.w;
  }
}

TEST(RobustWeights, MinimaxPointMatchesGridOracle) {
  const auto p = two_task_robust();
  InnerSolveSpec spec;
  const double w_star = 0.721854505598215, phi_star = 1.200737090071794;
  EXPECT_NEAR(primal_value(*p, Vector::Constant(1, w_star), spec).value, phi_star, 1e-9);
  for (double d : {-1e-3, 1e-3}) {
    EXPECT_GT(primal_value(*p, Vector::Constant(1, w_star + d), spec).value, phi_star);
  }
}

TEST(RobustWeights, FirstOrderVariantDropsCurvatureFromJacobian) {
  RobustWeightsSpec s;
  s.H = {Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 2.0)};
  s.centers = {Vector::Zero(1), Vector::Zero(1)};
  s.eta = 0.1;
  const auto exact = make_robust_weights(s);
  s.first_order = true;
  const auto fo = make_robust_weights(s);
  EXPECT_NEAR(exact->inner_mean_jacobian(Vector::Ones(1))(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(fo->inner_mean_jacobian(Vector::Ones(1))(0, 0), 1.0, 1e-15);
}

// ---- mixture weights --------------------------------------------------------------------------

// alpha* frozen from tests/oracles/problems_oracle.py (projected gradient vs
// the 1/m closed form).
TEST(MixtureWeights, IdenticalSourcesGiveClosedFormWeights) {
  MixtureWeightsSpec s;
  s.H_target = Matrix::Identity(2, 2);
  s.target_center = Vector::Zero(2);
  s.H.assign(4, Matrix::Identity(2, 2));
  s.centers.assign(4, Vector::Zero(2));
  s.m = Vector{{0.5, 1.0, 2.0, 4.0}};
  s.lambda = 0.5;
  s.c_smooth = 0.1;
  const auto p = make_mixture_weights(s);
  const Vector alpha{{0.5333333333333333, 0.26666666666666666, 0.13333333333333333, 0.06666666666666667}};
  const Vector w = Vector::Constant(2, 0.7);
  EXPECT_LE(p->inner_mean(w).norm(), 1e-15);
  EXPECT_NEAR(objective_value(*p, {alpha, w}), std::sqrt(0.1) + 0.5 * alpha.dot(s.m.cwiseProduct(alpha)), 1e-14);
  // alpha* is a fixed point of the projected gradient step.
  const FullGradient g = full_gradient(*p, {alpha, w});
  const Vector step = p->domain_x().project(alpha - 0.1 * g.gx);
  EXPECT_LE((step - alpha).norm(), 1e-12);
  EXPECT_LE(g.gy.norm(), 1e-12);
}

TEST(MixtureWeights, MetadataReflectsDiagonalRegularizer) {
  const auto p = build_problem("mixture_weights");
  EXPECT_EQ(p->meta().mode, CompositionMode::OnDual);
  EXPECT_GT(p->meta().mu_sc_x, 0.0);
  EXPECT_FALSE(p->meta().concave_in_y);
  EXPECT_TRUE(std::isfinite(p->meta().D_Y));
}

// ---- constraint penalty -------------------------------------------------------------------------

namespace {

ConstraintPenaltySpec penalty_spec(Vector xc, double kappa) {
  ConstraintPenaltySpec s;
  s.x_center = std::move(xc);
  s.P = Matrix{{1.0, 0.5}, {-0.3, 1.2}};
  s.q = Vector{{0.2, -0.1}};
  s.kappa = kappa;
  s.lambda_max = 5.0;
  return s;
}

}  // namespace

// Both cases frozen from tests/oracles/problems_oracle.py (grid + root in lambda).
TEST(ConstraintPenalty, FeasibleCenterHasZeroMultiplier) {
  const auto p = make_constraint_penalty(penalty_spec(Vector{{0.5, -0.25}}, 1.3165624999999999));
  const auto w = p->true_saddle();
  ASSERT_TRUE(w.has_value());
  EXPECT_LE((w->x - Vector{{0.5, -0.25}}).norm(), 1e-12);
  EXPECT_EQ(w->y(0), 0.0);
}

TEST(ConstraintPenalty, InfeasibleCenterMatchesRootOracle) {
  const auto p = make_constraint_penalty(penalty_spec(Vector{{1.5, 1.0}}, 0.6578125000000001));
  const auto w = p->true_saddle();
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(w->y(0), 0.7267038361777177, 1e-10);
  EXPECT_NEAR(w->x(0), 0.7197544505435017, 1e-10);
  EXPECT_NEAR(w->x(1), 0.42246526469935486, 1e-10);
}

// ---- WCWC toy -----------------------------------------------------------------------------------

TEST(WcwcToy, BilinearCoreAtZeroPerturbation) {
  Rng r = make_rng(2, Stream::ProblemData);
  const auto p = make_wcwc_toy(2, r, 0.0, 0.0);
  EXPECT_EQ(p->meta().rho_weak, 0.0);
  Rng probe = make_rng(0, Stream::Probe);
  EXPECT_GE(mvi_residual(*p, *p->true_saddle(), 10000, probe), -1e-12);
}

TEST(WcwcToy, DefaultScaleSatisfiesMinty) {
  const auto p = build_problem("wcwc_toy");
  Rng probe = make_rng(1, Stream::Probe);
  EXPECT_GE(mvi_residual(*p, *p->true_saddle(), 10000, probe), -1e-9);
  EXPECT_GT(p->meta().rho_weak, 0.0);
}

TEST(WcwcToy, WrongReferencePointViolatesMinty) {
  const auto p = build_problem("wcwc_toy");
  const auto& m = p->meta();
  const Vector corner = p->domain_x().project(Vector::Constant(m.d_x, 1e3));
  Rng probe = make_rng(2, Stream::Probe);
  EXPECT_LT(mvi_residual(*p, {corner, Vector::Zero(m.d_y)}, 10000, probe), 0.0);
}

TEST(WcwcToy, RejectsBoxBeyondMintyRegion) {
  WcwcToySpec s;
  s.K = Matrix::Identity(1, 1);
  s.D = Vector{{1.0, 1.0}};
  s.radius = 4.0;
  EXPECT_THROW(make_wcwc_toy(s), ParameterError);
}

// ---- registry and fixtures --------------------------------------------------------------------

TEST(Registry, BuildsEveryEntryAndRejectsUnknownKeys) {
  for (const auto& e : problem_registry()) EXPECT_NO_THROW(build_problem(e.name)) << e.name;
  EXPECT_THROW(build_problem("no_such_problem"), ParameterError);
  EXPECT_THROW(build_problem("quad_primal", {{"bogus", 1.0}}), ParameterError);
  EXPECT_THROW(build_problem("quad_primal", {{"noise_sigma", std::nan("")}}), ParameterError);
}

TEST(Registry, SameSeedSameProblem) {
  const auto a = build_problem("quad_primal", {{"seed", 5}});
  const auto b = build_problem("quad_primal", {{"seed", 5}});
  const auto c = build_problem("quad_primal", {{"seed", 6}});
  const Vector x = Vector::Ones(a->meta().d_x);
  EXPECT_EQ(a->inner_mean(x), b->inner_mean(x));
  EXPECT_NE(a->inner_mean(x), c->inner_mean(x));
}

TEST(Fixtures, RoundTripAndChecksum) {
  const Matrix m = Matrix::Random(3, 2);
  std::stringstream ss;
  write_fixture(ss, "block", m);
  write_fixture(ss, "other", Matrix::Identity(2, 2));
  const auto all = read_fixtures(ss);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].name, "block");
  EXPECT_EQ(all[0].value, m);
  std::string text;
  {
    std::stringstream s2;
    write_fixture(s2, "block", m);
    text = s2.str();
  }
  text[text.size() - 3] = text[text.size() - 3] == '1' ? '2' : '1';
  std::stringstream bad(text);
  EXPECT_THROW(read_fixture(bad), DataError);
  std::stringstream wrong_version("coda-fixture v9 name=a rows=0 cols=0 checksum=cbf29ce484222325\n");
  EXPECT_THROW(read_fixture(wrong_version), DataError);
  EXPECT_THROW(write_fixture(ss, "has space", m), ParameterError);
}
