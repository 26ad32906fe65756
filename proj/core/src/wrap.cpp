#include "coda/wrap.hpp"

#include <algorithm>
#include <cmath>

#include "coda/errors.hpp"

namespace coda {

ProximalWrap::ProximalWrap(std::shared_ptr<const Problem> base, Vector x_anchor, Vector y_anchor,
                           double x_weight, double y_weight)
    : base_(std::move(base)),
      x_anchor_(std::move(x_anchor)),
      y_anchor_(std::move(y_anchor)),
      x_weight_(x_weight),
      y_weight_(y_weight) {
  if (!base_) throw ParameterError("ProximalWrap: null base problem");
  if (!(x_weight_ >= 0.0) || !(y_weight_ >= 0.0) || !std::isfinite(x_weight_) ||
      !std::isfinite(y_weight_)) {
    throw ParameterError("ProximalWrap: weights must be finite and nonnegative");
  }
  const ProblemMeta& m = base_->meta();
  require_dim(x_anchor_, m.d_x, "ProximalWrap x_anchor");
  require_dim(y_anchor_, m.d_y, "ProximalWrap y_anchor");
  require_finite(x_anchor_, "ProximalWrap x_anchor");
  require_finite(y_anchor_, "ProximalWrap y_anchor");
  meta_ = m;
  meta_.L = m.L + std::max(x_weight_, y_weight_);
  meta_.mu_sc_x = m.mu_sc_x + x_weight_;
  meta_.mu_sc_y = m.mu_sc_y + y_weight_;
  meta_.rho_weak = std::max(0.0, m.rho_weak - std::min(x_weight_, y_weight_));
  meta_.concave_in_y = m.concave_in_y || (m.rho_weak > 0.0 && y_weight_ >= m.rho_weak);
  meta_.has_true_saddle = m.has_true_saddle && x_weight_ == 0.0 && y_weight_ == 0.0;
}

std::string ProximalWrap::name() const { return base_->name() + "+prox"; }

Vector ProximalWrap::inner(const Vector& input, std::uint64_t draw) const {
  return base_->inner(input, draw);
}
Matrix ProximalWrap::inner_jacobian(const Vector& input, std::uint64_t draw) const {
  return base_->inner_jacobian(input, draw);
}
Vector ProximalWrap::inner_vjp(const Vector& input, std::uint64_t draw, const Vector& v) const {
  return base_->inner_vjp(input, draw, v);
}
Vector ProximalWrap::inner_mean(const Vector& input) const { return base_->inner_mean(input); }
Matrix ProximalWrap::inner_mean_jacobian(const Vector& input) const {
  return base_->inner_mean_jacobian(input);
}

double ProximalWrap::outer_value(const Vector& a, const Vector& b, std::uint64_t draw) const {
  return base_->outer_value(a, b, draw);
}
Vector ProximalWrap::outer_grad1(const Vector& a, const Vector& b, std::uint64_t draw) const {
  return base_->outer_grad1(a, b, draw);
}
Vector ProximalWrap::outer_grad2(const Vector& a, const Vector& b, std::uint64_t draw) const {
  return base_->outer_grad2(a, b, draw);
}
double ProximalWrap::outer_mean_value(const Vector& a, const Vector& b) const {
  return base_->outer_mean_value(a, b);
}
Vector ProximalWrap::outer_mean_grad1(const Vector& a, const Vector& b) const {
  return base_->outer_mean_grad1(a, b);
}
Vector ProximalWrap::outer_mean_grad2(const Vector& a, const Vector& b) const {
  return base_->outer_mean_grad2(a, b);
}

double ProximalWrap::h_value(const Vector& x) const {
  return base_->h_value(x) + 0.5 * x_weight_ * (x - x_anchor_).squaredNorm();
}
Vector ProximalWrap::h_grad(const Vector& x) const {
  Vector g = base_->h_grad(x);
  if (x_weight_ != 0.0) g += x_weight_ * (x - x_anchor_);
  return g;
}
double ProximalWrap::r_value(const Vector& y) const {
  return base_->r_value(y) + 0.5 * y_weight_ * (y - y_anchor_).squaredNorm();
}
Vector ProximalWrap::r_grad(const Vector& y) const {
  Vector g = base_->r_grad(y);
  if (y_weight_ != 0.0) g += y_weight_ * (y - y_anchor_);
  return g;
}

// u + eta (grad r(u) + w (u - a)) = v  <=>  u + eta' grad r(u) = v',
// v' = (v + eta w a) / (1 + eta w), eta' = eta / (1 + eta w).
Vector ProximalWrap::r_implicit_step(const Vector& v, double eta) const {
  if (y_weight_ == 0.0) return base_->r_implicit_step(v, eta);
  const double s = 1.0 + eta * y_weight_;
  return base_->r_implicit_step((v + eta * y_weight_ * y_anchor_) / s, eta / s);
}

std::optional<PrimalDualPoint> ProximalWrap::true_saddle() const {
  if (x_weight_ == 0.0 && y_weight_ == 0.0) return base_->true_saddle();
  return std::nullopt;
}

std::shared_ptr<const ProximalWrap> augment_concavity(std::shared_ptr<const Problem> problem, double eps,
                                                      double L, double D_Y, const Vector& y0) {
  if (!problem) throw ParameterError("augment_concavity: null problem");
  if (!problem->domain_y().bounded() || !std::isfinite(D_Y)) {
    throw CapabilityError("augment_concavity: Y must be bounded");
  }
  if (!(eps >= 0.0) || !(L > 0.0) || !(D_Y > 0.0)) {
    throw ParameterError("augment_concavity: need eps >= 0, L > 0 and D_Y > 0");
  }
  const double mu = eps * eps / (L * D_Y * D_Y);
  const Vector x_anchor = Vector::Zero(problem->meta().d_x);
  return std::make_shared<ProximalWrap>(std::move(problem), x_anchor, y0, 0.0, 2.0 * mu);
}

}  // namespace coda
