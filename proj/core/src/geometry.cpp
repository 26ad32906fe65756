#include "coda/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "coda/errors.hpp"

namespace coda {

DomainSpec DomainSpec::unconstrained() { return DomainSpec(Unconstrained{}); }

DomainSpec DomainSpec::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw ShapeError("Box: lo and hi must be nonempty and of equal dimension");
  }
  if ((lo.array() > hi.array()).any()) {
    throw ParameterError("Box: lo must not exceed hi");
  }
  return DomainSpec(Box{std::move(lo), std::move(hi)});
}

DomainSpec DomainSpec::box(Eigen::Index dim, double lo, double hi) {
  return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

DomainSpec DomainSpec::ball(Vector center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ParameterError("Ball: radius must be positive and finite");
  }
  if (center.size() == 0) throw ShapeError("Ball: empty center");
  return DomainSpec(Ball{std::move(center), radius});
}

DomainSpec DomainSpec::simplex(Eigen::Index dim) {
  if (dim < 1) throw ParameterError("Simplex: dimension must be >= 1");
  return DomainSpec(Simplex{dim});
}

DomainKind DomainSpec::kind() const { return static_cast<DomainKind>(spec_.index()); }

double DomainSpec::diameter() const {
  switch (kind()) {
    case DomainKind::Unconstrained:
      return std::numeric_limits<double>::infinity();
    case DomainKind::Box: {
      const auto& b = std::get<Box>(spec_);
      return (b.hi - b.lo).norm();
    }
    case DomainKind::Ball:
      return 2.0 * std::get<Ball>(spec_).radius;
    case DomainKind::Simplex:
      return std::get<Simplex>(spec_).dim > 1 ? std::sqrt(2.0) : 0.0;
  }
  return 0.0;
}

Eigen::Index DomainSpec::dim() const {
  switch (kind()) {
    case DomainKind::Unconstrained:
      return -1;
    case DomainKind::Box:
      return std::get<Box>(spec_).lo.size();
    case DomainKind::Ball:
      return std::get<Ball>(spec_).center.size();
    case DomainKind::Simplex:
      return std::get<Simplex>(spec_).dim;
  }
  return -1;
}

Vector project_simplex(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw ShapeError("project_simplex: empty vector");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Descending by value, ties broken by index.
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  });
  double cumsum = 0.0;
  double threshold = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += v[order[static_cast<std::size_t>(k)]];
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (v[order[static_cast<std::size_t>(k)]] - candidate > 0.0) threshold = candidate;
  }
  Vector out = (v.array() - threshold).max(0.0).matrix();
  const double total = out.sum();
  if (!(total > 0.0)) {
    throw NumericError("project_simplex: degenerate input");
  }
  return out / total;
}

Vector DomainSpec::project(const Vector& v) const {
  const Eigen::Index d = dim();
  if (d >= 0 && v.size() != d) {
    throw ShapeError("project: expected dimension " + std::to_string(d) + ", got " +
                     std::to_string(v.size()));
  }
  switch (kind()) {
    case DomainKind::Unconstrained:
      return v;
    case DomainKind::Box: {
      const auto& b = std::get<Box>(spec_);
      return v.cwiseMax(b.lo).cwiseMin(b.hi);
    }
    case DomainKind::Ball: {
      const auto& b = std::get<Ball>(spec_);
      const Vector offset = v - b.center;
      const double norm = offset.norm();
      if (norm <= b.radius) return v;
      return b.center + offset * (b.radius / norm);
    }
    case DomainKind::Simplex:
      return project_simplex(v);
  }
  return v;
}

bool DomainSpec::contains(const Vector& v, double tol) const {
  const Eigen::Index d = dim();
  if (d >= 0 && v.size() != d) return false;
  switch (kind()) {
    case DomainKind::Unconstrained:
      return true;
    case DomainKind::Box: {
      const auto& b = std::get<Box>(spec_);
      return ((v - b.lo).array() >= -tol).all() && ((b.hi - v).array() >= -tol).all();
    }
    case DomainKind::Ball: {
      const auto& b = std::get<Ball>(spec_);
      return (v - b.center).norm() <= b.radius + tol;
    }
    case DomainKind::Simplex:
      return (v.array() >= -tol).all() && std::abs(v.sum() - 1.0) <= tol * static_cast<double>(d);
  }
  return false;
}

Vector DomainSpec::sample(Rng& rng, Eigen::Index dimension) const {
  const Eigen::Index d = dim() >= 0 ? dim() : dimension;
  Vector out(d);
  switch (kind()) {
    case DomainKind::Unconstrained:
      for (Eigen::Index i = 0; i < d; ++i) out[i] = rng.normal();
      return out;
    case DomainKind::Box: {
      const auto& b = std::get<Box>(spec_);
      for (Eigen::Index i = 0; i < d; ++i) out[i] = rng.uniform(b.lo[i], b.hi[i]);
      return out;
    }
    case DomainKind::Ball: {
      const auto& b = std::get<Ball>(spec_);
      for (Eigen::Index i = 0; i < d; ++i) out[i] = rng.normal();
      const double n = out.norm();
      const double r = b.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
      return b.center + (n > 0.0 ? out * (r / n) : out);
    }
    case DomainKind::Simplex: {
      for (Eigen::Index i = 0; i < d; ++i) out[i] = -std::log(rng.uniform_open_low());
      return out / out.sum();
    }
  }
  return out;
}

Vector project(const DomainSpec& domain, const Vector& v) { return domain.project(v); }

Vector prox_sq(const DomainSpec& domain, const Vector& v, const Vector& center, double rho) {
  if (!(rho > 0.0)) throw ParameterError("prox_sq: rho must be > 0");
  if (v.size() != center.size()) throw ShapeError("prox_sq: v and center differ in dimension");
  // The two isotropic quadratics combine into one centred at the weighted mean,
  // so the constrained minimizer is the projection of that mean on every domain.
  return domain.project((rho * v + center) / (rho + 1.0));
}

}  // namespace coda
