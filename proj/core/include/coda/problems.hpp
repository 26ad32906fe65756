#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coda/geometry.hpp"
#include "coda/oracle.hpp"
#include "coda/rng.hpp"

namespace coda {

using ProblemPtr = std::shared_ptr<const Problem>;

// ---- affine-noise quadratic ---------------------------------------------------
//
// g(v; xi) = B v + b + sigma xi,  xi ~ N(0, I), and outer maps
//   OnPrimal  f(z, y) = 1/2 z'Az + z'Cy
//   OnDual    f(x, z) = x'Cz + 1/2 z'Az
//   OnBoth    f(z)    = 1/2 z'Az
//   None      f(x, y) = 1/2 x'Ax + x'Cy
// each plus the mean-zero outer noise sigma (zeta_1'a + zeta_2'b);
// h = mu_x/2 |x|^2, r = mu_y/2 |y|^2. A negative mu makes that side nonconvex
// (nonconcave).
struct QuadCompositionalSpec {
  CompositionMode mode = CompositionMode::OnPrimal;
  Eigen::Index d_x = 1;
  Eigen::Index d_y = 1;
  Matrix A;
  Matrix B;
  Vector b;  // empty means zero
  Matrix C;
  double mu_x = 1.0;
  double mu_y = 1.0;
  double noise_sigma = 0.0;
  DomainSpec domain_x = DomainSpec::unconstrained();
  DomainSpec domain_y = DomainSpec::unconstrained();
  std::string name = "quad";
};

// F(w) = 1/2 w'Hw + c'w + const over w = [x; y].
struct QuadraticForm {
  Matrix H;
  Vector c;
};

QuadraticForm quad_form(const QuadCompositionalSpec& spec);

ProblemPtr make_quad(const QuadCompositionalSpec& spec);

// Stationary point of the quadratic by a direct solve of H w = -c. Requires
// F strongly concave in y with a strongly convex primal function, and
// unconstrained domains. DegeneracyError on a singular system.
PrimalDualPoint make_quad_saddle(const QuadCompositionalSpec& spec);

enum class QuadRegime { ScSc, NcSc };

// Random well-conditioned instance of the given mode and regime.
QuadCompositionalSpec random_quad_spec(CompositionMode mode, QuadRegime regime, Eigen::Index d_x,
                                       Eigen::Index d_y, double noise_sigma, Rng& rng);

// ---- AUC toy --------------------------------------------------------------------
//
// Linear scorer on two Gaussian classes. Primal (w, a, b), dual theta in
// [-theta_bound, theta_bound]; the primal block is composed with the one-step
// adaptation w -> w - alpha grad L(w), L the mean squared loss.
struct AucToySpec {
  int n = 400;
  int d = 2;
  double imratio = 0.1;
  double alpha_inner = 0.1;
  double separation = 2.0;  // distance of each class mean from the origin
  double spread = 0.5;      // per-coordinate standard deviation
  double theta_bound = 10.0;
};

ProblemPtr make_auc_toy(const AucToySpec& spec, Rng& rng);

// Area under the ROC curve of scores w'x_i on the toy's training set (ties
// count one half). ParameterError if `problem` is not an AUC toy.
double training_auc(const Problem& problem, const Vector& w);

// ---- robust weights (task-robust one-step adaptation) -------------------------------
//
// min_w max_{alpha in simplex} sum_i alpha_i L_i(w - eta grad L_i(w; xi)),
// L_i(w) = 1/2 (w - c_i)'H_i(w - c_i), gradient noise sigma.
struct RobustWeightsSpec {
  std::vector<Matrix> H;
  std::vector<Vector> centers;
  double eta = 0.1;
  double noise_sigma = 0.0;
  // Use I in place of (I - eta H_i) in the Jacobian, as first-order MAML does.
  bool first_order = false;
};

ProblemPtr make_robust_weights(const RobustWeightsSpec& spec);
ProblemPtr make_robust_weights(int n_tasks, int d, Rng& rng, double noise_sigma = 0.1,
                               bool first_order = false);

// ---- mixture weights ----------------------------------------------------------------
//
// min_{alpha in simplex} max_{|w - 0| <= radius}
//   sum_i alpha_i sqrt((L_T(w) - L_i(w))^2 + c) + lambda alpha'M alpha,
// the loss differences forming the inner map of w (composition on the dual).
struct MixtureWeightsSpec {
  Matrix H_target;
  Vector target_center;
  std::vector<Matrix> H;
  std::vector<Vector> centers;
  Vector m;  // diagonal of M
  double lambda = 0.5;
  double c_smooth = 0.1;
  double radius = 2.0;
  double noise_sigma = 0.0;
};

ProblemPtr make_mixture_weights(const MixtureWeightsSpec& spec);
ProblemPtr make_mixture_weights(int n_sources, int d, Rng& rng, double noise_sigma = 0.1);

// ---- compositional constraint penalty ------------------------------------------------
//
// min_x max_{lambda in [0, lambda_max]} 1/2|x - x_c|^2 + lambda (1/2 |E[Px + q + xi]|^2 - kappa).
struct ConstraintPenaltySpec {
  Vector x_center;
  Matrix P;
  Vector q;
  double kappa = 1.0;
  double lambda_max = 5.0;
  double noise_sigma = 0.0;
};

ProblemPtr make_constraint_penalty(const ConstraintPenaltySpec& spec);
ProblemPtr make_constraint_penalty(int d, Rng& rng, double noise_sigma = 0.1, bool feasible = false);

// ---- weakly-convex-weakly-concave toy --------------------------------------------------
//
// g(w; xi) = D w + sigma xi over w = [x; y] (D positive diagonal),
// f(z) = z_x'K z_y - s sum cos(z_x) + s sum cos(z_y). On the box |D w| <= pi
// the Minty condition holds at w* = 0; s = 0 leaves the bilinear core.
struct WcwcToySpec {
  Matrix K;
  Vector D;  // 2d diagonal entries
  double perturbation = 0.5;
  double radius = 2.0;
  double noise_sigma = 0.0;
};

// Self-checks the Minty condition on 10^4 probes; ConstructionError if it fails.
ProblemPtr make_wcwc_toy(const WcwcToySpec& spec);
ProblemPtr make_wcwc_toy(int d, Rng& rng, double noise_sigma = 0.1, double perturbation = 0.5);

// ---- registry ----------------------------------------------------------------------

using ProblemParams = std::map<std::string, double>;

struct ProblemEntry {
  std::string name;
  std::string description;
  ProblemParams defaults;
  std::function<ProblemPtr(const ProblemParams&)> make;
};

const std::vector<ProblemEntry>& problem_registry();
const ProblemEntry& find_problem(const std::string& name);

// Builds a registered problem. Keys missing from `params` take the entry's
// defaults; unknown keys raise ParameterError.
ProblemPtr build_problem(const std::string& name, const ProblemParams& params = {});

// ---- plain-text fixtures -------------------------------------------------------------
//
// One matrix per block:
//   coda-fixture v1 name=<name> rows=<r> cols=<c> checksum=<fnv1a64 hex of body>
// followed by r lines of c space-separated 17-significant-digit values.

struct NamedMatrix {
  std::string name;
  Matrix value;
};

void write_fixture(std::ostream& os, const std::string& name, const Matrix& m);
// Reads the next block; DataError on a malformed header, size or checksum.
NamedMatrix read_fixture(std::istream& is);
std::vector<NamedMatrix> read_fixtures(std::istream& is);

}  // namespace coda
