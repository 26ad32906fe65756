#pragma once

#include <limits>
#include <variant>

#include "coda/rng.hpp"
#include "coda/types.hpp"

namespace coda {

struct Unconstrained {};

struct Box {
  Vector lo;
  Vector hi;
};

struct Ball {
  Vector center;
  double radius = 1.0;
};

// Probability simplex {v >= 0, sum v = 1}.
struct Simplex {
  Eigen::Index dim = 1;
};

enum class DomainKind { Unconstrained, Box, Ball, Simplex };

class DomainSpec {
 public:
  DomainSpec() = default;

  static DomainSpec unconstrained();
  static DomainSpec box(Vector lo, Vector hi);
  static DomainSpec box(Eigen::Index dim, double lo, double hi);
  static DomainSpec ball(Vector center, double radius);
  static DomainSpec simplex(Eigen::Index dim);

  DomainKind kind() const;
  bool bounded() const { return kind() != DomainKind::Unconstrained; }
  // Euclidean diameter; +inf when unbounded.
  double diameter() const;
  // Dimension fixed by the domain, or -1 for Unconstrained.
  Eigen::Index dim() const;

  // Euclidean projection. Idempotent, nonexpansive; simplex output is exactly
  // feasible (nonnegative, renormalized).
  Vector project(const Vector& v) const;

  bool contains(const Vector& v, double tol = 1e-12) const;

  // A random point of the domain. Box and Ball are sampled uniformly, the
  // simplex from the flat Dirichlet; unconstrained draws are standard normal.
  Vector sample(Rng& rng, Eigen::Index dim) const;

  const auto& variant() const { return spec_; }

 private:
  explicit DomainSpec(std::variant<Unconstrained, Box, Ball, Simplex> s) : spec_(std::move(s)) {}

  std::variant<Unconstrained, Box, Ball, Simplex> spec_;
};

Vector project(const DomainSpec& domain, const Vector& v);

// argmin_{u in domain} |u - v|^2 + (1/rho)|u - center|^2.
Vector prox_sq(const DomainSpec& domain, const Vector& v, const Vector& center, double rho);

// Sorted-threshold projection onto the probability simplex.
Vector project_simplex(const Vector& v);

}  // namespace coda
