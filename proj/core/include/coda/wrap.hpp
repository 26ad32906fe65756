#pragma once

#include <memory>

#include "coda/oracle.hpp"

namespace coda {

// F + x_weight/2 |x - x_anchor|^2 - y_weight/2 |y - y_anchor|^2, with the
// quadratic terms absorbed into h and r. The inner and outer maps are the
// base problem's, so trackers and measures see the same composition.
class ProximalWrap final : public Problem {
 public:
  ProximalWrap(std::shared_ptr<const Problem> base, Vector x_anchor, Vector y_anchor, double x_weight,
               double y_weight);

  const Problem& base() const { return *base_; }
  const Vector& x_anchor() const { return x_anchor_; }
  const Vector& y_anchor() const { return y_anchor_; }
  double x_weight() const { return x_weight_; }
  double y_weight() const { return y_weight_; }

  std::string name() const override;
  const ProblemMeta& meta() const override { return meta_; }
  const DomainSpec& domain_x() const override { return base_->domain_x(); }
  const DomainSpec& domain_y() const override { return base_->domain_y(); }

  Vector inner(const Vector& input, std::uint64_t draw) const override;
  Matrix inner_jacobian(const Vector& input, std::uint64_t draw) const override;
  Vector inner_vjp(const Vector& input, std::uint64_t draw, const Vector& v) const override;
  Vector inner_mean(const Vector& input) const override;
  Matrix inner_mean_jacobian(const Vector& input) const override;

  double outer_value(const Vector& a, const Vector& b, std::uint64_t draw) const override;
  Vector outer_grad1(const Vector& a, const Vector& b, std::uint64_t draw) const override;
  Vector outer_grad2(const Vector& a, const Vector& b, std::uint64_t draw) const override;
  double outer_mean_value(const Vector& a, const Vector& b) const override;
  Vector outer_mean_grad1(const Vector& a, const Vector& b) const override;
  Vector outer_mean_grad2(const Vector& a, const Vector& b) const override;

  double h_value(const Vector& x) const override;
  Vector h_grad(const Vector& x) const override;
  double r_value(const Vector& y) const override;
  Vector r_grad(const Vector& y) const override;
  // Exact whenever the base step is exact: the added quadratic folds into a
  // rescaled base step.
  Vector r_implicit_step(const Vector& v, double eta) const override;

  // The base saddle survives only a zero-weight wrap.
  std::optional<PrimalDualPoint> true_saddle() const override;
  PrimalDualPoint default_start() const override { return base_->default_start(); }

 private:
  std::shared_ptr<const Problem> base_;
  Vector x_anchor_;
  Vector y_anchor_;
  double x_weight_;
  double y_weight_;
  ProblemMeta meta_;
};

// F - (eps^2 / (L D_Y^2)) |y - y0|^2: strongly concave with modulus
// 2 eps^2 / (L D_Y^2) added to the base. CapabilityError for unbounded Y.
std::shared_ptr<const ProximalWrap> augment_concavity(std::shared_ptr<const Problem> problem, double eps,
                                                      double L, double D_Y, const Vector& y0);

}  // namespace coda
