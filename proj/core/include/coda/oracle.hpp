#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coda/geometry.hpp"
#include "coda/rng.hpp"
#include "coda/types.hpp"

namespace coda {

// Where the nested expectation sits:
//   OnPrimal  F = h(x) + f(E g(x), y) - r(y)
//   OnDual    F = h(x) + f(x, E g(y)) - r(y)
//   OnBoth    F = h(x) + f(E g([x; y])) - r(y)
//   None      F = h(x) + f(x, y) - r(y)
enum class CompositionMode { OnPrimal, OnDual, OnBoth, None };

const char* to_string(CompositionMode mode);

struct ProblemMeta {
  Eigen::Index d_x = 1;
  Eigen::Index d_y = 1;
  Eigen::Index d_z = 1;
  CompositionMode mode = CompositionMode::OnPrimal;
  double L = 1.0;         // smoothness bound of F
  double mu_sc_x = 0.0;   // strong convexity in x (0 if absent)
  double mu_sc_y = 0.0;   // strong concavity in y (0 if absent)
  double rho_weak = 0.0;  // weak convexity / concavity modulus
  double sigma = 0.0;     // noise scale; 0 declares all samples identical (oracles evaluate one)
  double D_X = std::numeric_limits<double>::infinity();
  double D_Y = std::numeric_limits<double>::infinity();
  bool has_true_saddle = false;
  bool has_closed_form_g = false;
  // F(x, .) concave for every x, so max_y F(x, y) is a well-posed concave program.
  bool concave_in_y = false;

  // Dimension of the inner map's input for this mode.
  Eigen::Index inner_input_dim() const;
};

enum class SampleKind { Inner, Outer };

// A reproducible sample token: xi ~ S_g (Inner) or zeta ~ S_f (Outer). The
// problem expands the token into whatever randomness one sample needs.
struct OracleSample {
  SampleKind kind = SampleKind::Inner;
  std::uint64_t draw = 0;
};

using Batch = std::vector<OracleSample>;

Batch draw_batch(Rng& rng, SampleKind kind, int size);

// A stochastic compositional minimax problem. Implementations are immutable;
// all randomness enters through sample tokens.
//
// The outer map takes two arguments whose meaning follows the mode:
// (z, y) for OnPrimal, (x, z) for OnDual, (z, <empty>) for OnBoth and (x, y)
// for None.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual const ProblemMeta& meta() const = 0;
  virtual const DomainSpec& domain_x() const = 0;
  virtual const DomainSpec& domain_y() const = 0;

  virtual Vector inner(const Vector& input, std::uint64_t draw) const = 0;
  virtual Matrix inner_jacobian(const Vector& input, std::uint64_t draw) const = 0;
  // J(input; xi)^T v. Override when the Jacobian is structured.
  virtual Vector inner_vjp(const Vector& input, std::uint64_t draw, const Vector& v) const;

  // Closed-form E[g] and its Jacobian; CapabilityError unless has_closed_form_g.
  virtual Vector inner_mean(const Vector& input) const;
  virtual Matrix inner_mean_jacobian(const Vector& input) const;

  virtual double outer_value(const Vector& a, const Vector& b, std::uint64_t draw) const = 0;
  virtual Vector outer_grad1(const Vector& a, const Vector& b, std::uint64_t draw) const = 0;
  virtual Vector outer_grad2(const Vector& a, const Vector& b, std::uint64_t draw) const = 0;

  // Expectation of the outer map over zeta. Required when has_closed_form_g.
  virtual double outer_mean_value(const Vector& a, const Vector& b) const;
  virtual Vector outer_mean_grad1(const Vector& a, const Vector& b) const;
  virtual Vector outer_mean_grad2(const Vector& a, const Vector& b) const;

  virtual double h_value(const Vector& x) const;
  virtual Vector h_grad(const Vector& x) const;
  virtual double r_value(const Vector& y) const;
  virtual Vector r_grad(const Vector& y) const;

  // Solves u + eta * grad r(u) = v for u. The default performs one
  // fixed-point sweep from u = v; quadratic regularizers override it exactly.
  virtual Vector r_implicit_step(const Vector& v, double eta) const;

  // A known saddle point, when the problem has one in closed form.
  virtual std::optional<PrimalDualPoint> true_saddle() const { return std::nullopt; }

  // Deterministic starting point used when a run does not supply one.
  virtual PrimalDualPoint default_start() const;
};

// ---- minibatch oracles ------------------------------------------------------

Vector g_value(const Problem& problem, const Vector& input, std::span<const OracleSample> batch);
Matrix g_jacobian(const Problem& problem, const Vector& input,
                  std::span<const OracleSample> batch);

double f_value(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch);
Vector f_grad1(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch);
// ModeError under OnBoth, where f has a single argument.
Vector f_grad2(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch);

// Pairwise chain rule (1/B) sum_i J(input; xi_i)^T grad_k f(a, b; zeta_i) with
// k = 1 (slot 1) or 2, the gradient estimate of every compositional step.
Vector chain_grad(const Problem& problem, const Vector& input, int slot, const Vector& a,
                  const Vector& b, std::span<const OracleSample> inner_batch,
                  std::span<const OracleSample> outer_batch);

Vector h_grad(const Problem& problem, const Vector& x);
Vector r_grad(const Problem& problem, const Vector& y);

// ---- full-expectation quantities used by measures ----------------------------

// Monte Carlo fallback size for problems without a closed-form inner mean.
inline constexpr int kDefaultMonteCarloSamples = 1 << 16;

struct FullGradient {
  Vector gx;
  Vector gy;
};

// Exact grad F of the expectation objective: closed-form E[g] when available,
// otherwise mc_samples draws from a fixed measurement stream. CapabilityError
// when neither is possible (mc_samples == 0 without a closed form).
FullGradient full_gradient(const Problem& problem, const PrimalDualPoint& point,
                           int mc_samples = kDefaultMonteCarloSamples);

// F(x, y) of the expectation objective, same capability rules.
double objective_value(const Problem& problem, const PrimalDualPoint& point,
                       int mc_samples = kDefaultMonteCarloSamples);

// E[g](input) with the same capability rules.
Vector inner_expectation(const Problem& problem, const Vector& input,
                         int mc_samples = kDefaultMonteCarloSamples);

// ---- finite-difference validation ---------------------------------------------

struct DerivativeCheck {
  std::string derivative;  // "g_jacobian", "f_grad1", ...
  double max_rel_error = 0.0;
  // Location of the worst entry (row, column) for matrix-valued derivatives.
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  bool passed = true;
};

struct GradientReport {
  std::string problem;
  int n_points = 0;
  double tol = 0.0;
  std::vector<DerivativeCheck> checks;
  bool passed = true;

  std::string to_string() const;
};

// Central-difference step cbrt(eps) * (1 + |input|_inf).
double fd_step(const Vector& input);

// Compares every analytic derivative of the problem with central finite
// differences at n_points random in-domain points. A failed comparison is
// reported, not thrown. ParameterError when n_points < 1.
GradientReport check_gradients(const Problem& problem, int n_points, double tol,
                               std::uint64_t seed = 0);

}  // namespace coda
