#include "coda/problems.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "coda/errors.hpp"
#include "coda/format.hpp"
#include "coda/measures.hpp"

namespace coda {

namespace {

Vector token_normals(TokenStream& ts, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = ts.normal();
  return v;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

Vector gaussian(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Matrix random_orthogonal(Eigen::Index n, Rng& rng) {
  const Matrix g = gaussian(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

// Symmetric positive definite with spectrum in [lo, hi].
Matrix random_spd(Eigen::Index n, double lo, double hi, Rng& rng) {
  const Matrix q = random_orthogonal(n, rng);
  Vector eig(n);
  for (Eigen::Index i = 0; i < n; ++i) eig(i) = rng.uniform(lo, hi);
  return q * eig.asDiagonal() * q.transpose();
}

Eigen::VectorXd sym_eigenvalues(const Matrix& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double sym_min_eig(const Matrix& m) {
  const auto e = sym_eigenvalues(m);
  return e.size() ? e.minCoeff() : 0.0;
}

double sym_max_eig(const Matrix& m) {
  const auto e = sym_eigenvalues(m);
  return e.size() ? e.maxCoeff() : 0.0;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double sq(double v) { return v * v; }

void check_domain_dim(const DomainSpec& d, Eigen::Index dim, const char* what) {
  if (d.dim() != -1 && d.dim() != dim) {
    throw ShapeError(std::string(what) + ": domain dimension does not match the variable");
  }
}

class SuiteProblem : public Problem {
 public:
  std::string name() const override { return name_; }
  const ProblemMeta& meta() const override { return meta_; }
  const DomainSpec& domain_x() const override { return dom_x_; }
  const DomainSpec& domain_y() const override { return dom_y_; }
  std::optional<PrimalDualPoint> true_saddle() const override { return saddle_; }

 protected:
  void set_diameters() {
    meta_.D_X = dom_x_.diameter();
    meta_.D_Y = dom_y_.diameter();
  }

  std::string name_;
  ProblemMeta meta_;
  DomainSpec dom_x_;
  DomainSpec dom_y_;
  std::optional<PrimalDualPoint> saddle_;
};

// ---- quadratic ---------------------------------------------------------------------

Eigen::Index quad_dz(const QuadCompositionalSpec& s) {
  return s.mode == CompositionMode::None ? 1 : s.A.rows();
}

void validate_quad(const QuadCompositionalSpec& s) {
  if (s.d_x < 1 || s.d_y < 1) throw ShapeError("quad: d_x and d_y must be positive");
  if (s.A.rows() != s.A.cols() || s.A.rows() < 1) throw ShapeError("quad: A must be square");
  if (!s.A.allFinite() || !s.B.allFinite() || !s.C.allFinite() || !s.b.allFinite()) {
    throw ParameterError("quad: non-finite data");
  }
  const double asym = (s.A - s.A.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + s.A.cwiseAbs().maxCoeff())) {
    throw ParameterError("quad: A must be symmetric");
  }
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma)) {
    throw ParameterError("quad: noise_sigma must be nonnegative");
  }
  if (!std::isfinite(s.mu_x) || !std::isfinite(s.mu_y)) throw ParameterError("quad: non-finite mu");
  const Eigen::Index dz = s.A.rows();
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
  };
  switch (s.mode) {
    case CompositionMode::OnPrimal:
      need(s.B.rows() == dz && s.B.cols() == s.d_x, "quad: B must be d_z x d_x");
      need(s.C.rows() == dz && s.C.cols() == s.d_y, "quad: C must be d_z x d_y");
      break;
    case CompositionMode::OnDual:
      need(s.B.rows() == dz && s.B.cols() == s.d_y, "quad: B must be d_z x d_y");
      need(s.C.rows() == s.d_x && s.C.cols() == dz, "quad: C must be d_x x d_z");
      break;
    case CompositionMode::OnBoth:
      need(s.B.rows() == dz && s.B.cols() == s.d_x + s.d_y, "quad: B must be d_z x (d_x + d_y)");
      need(s.C.size() == 0, "quad: C is unused under OnBoth");
      break;
    case CompositionMode::None:
      need(dz == s.d_x, "quad: A must be d_x x d_x without composition");
      need(s.C.rows() == s.d_x && s.C.cols() == s.d_y, "quad: C must be d_x x d_y");
      need(s.B.size() == 0 && s.b.size() == 0, "quad: B and b are unused without composition");
      break;
  }
  if (s.mode != CompositionMode::None) {
    need(s.b.size() == 0 || s.b.size() == dz, "quad: b must have d_z entries");
  }
  check_domain_dim(s.domain_x, s.d_x, "quad");
  check_domain_dim(s.domain_y, s.d_y, "quad");
}

class Quad final : public SuiteProblem {
 public:
  explicit Quad(QuadCompositionalSpec s) : s_(std::move(s)) {
    validate_quad(s_);
    const Eigen::Index dz = quad_dz(s_);
    b_ = s_.b.size() ? s_.b : Vector::Zero(dz);
    if (s_.mode == CompositionMode::OnBoth) s_.C = Matrix::Zero(dz, 0);
    name_ = s_.name;
    dom_x_ = s_.domain_x;
    dom_y_ = s_.domain_y;

    const QuadraticForm q = quad_form(s_);
    const Eigen::Index dx = s_.d_x;
    const Eigen::Index dy = s_.d_y;
    const Matrix hxx = q.H.topLeftCorner(dx, dx);
    const Matrix hyy = q.H.bottomRightCorner(dy, dy);
    const Matrix hxy = q.H.topRightCorner(dx, dy);

    meta_.d_x = dx;
    meta_.d_y = dy;
    meta_.d_z = dz;
    meta_.mode = s_.mode;
    const auto eig = sym_eigenvalues(q.H);
    meta_.L = std::max(eig.cwiseAbs().maxCoeff(), 1e-12);
    meta_.mu_sc_x = std::max(0.0, sym_min_eig(hxx));
    meta_.mu_sc_y = std::max(0.0, -sym_max_eig(hyy));
    meta_.rho_weak = std::max({0.0, -sym_min_eig(hxx), sym_max_eig(hyy)});
    meta_.sigma = s_.noise_sigma;
    meta_.has_closed_form_g = true;
    meta_.concave_in_y = sym_max_eig(hyy) <= 1e-12;
    set_diameters();

    const bool unconstrained = !dom_x_.bounded() && !dom_y_.bounded();
    if (unconstrained && meta_.mu_sc_y > 0.0) {
      const Matrix schur = hxx - hxy * hyy.inverse() * hxy.transpose();
      if (sym_min_eig(schur) > 0.0) {
        saddle_ = make_quad_saddle(s_);
        meta_.has_true_saddle = true;
      }
    }
  }

  Vector inner(const Vector& v, std::uint64_t draw) const override {
    require_composed();
    Vector out = s_.B * v + b_;
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      out += s_.noise_sigma * token_normals(ts, out.size());
    }
    return out;
  }

  Matrix inner_jacobian(const Vector&, std::uint64_t) const override {
    require_composed();
    return s_.B;
  }

  Vector inner_vjp(const Vector&, std::uint64_t, const Vector& v) const override {
    require_composed();
    return s_.B.transpose() * v;
  }

  Vector inner_mean(const Vector& v) const override {
    require_composed();
    return s_.B * v + b_;
  }

  Matrix inner_mean_jacobian(const Vector&) const override {
    require_composed();
    return s_.B;
  }

  double outer_value(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    double v = outer_mean_value(a, b);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      v += s_.noise_sigma * token_normals(ts, a.size()).dot(a);
      v += s_.noise_sigma * token_normals(ts, b.size()).dot(b);
    }
    return v;
  }

  Vector outer_grad1(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    Vector g = outer_mean_grad1(a, b);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      g += s_.noise_sigma * token_normals(ts, a.size());
    }
    return g;
  }

  Vector outer_grad2(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    Vector g = outer_mean_grad2(a, b);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      token_normals(ts, a.size());
      g += s_.noise_sigma * token_normals(ts, b.size());
    }
    return g;
  }

  double outer_mean_value(const Vector& a, const Vector& b) const override {
    if (s_.mode == CompositionMode::OnDual) return a.dot(s_.C * b) + 0.5 * b.dot(s_.A * b);
    return 0.5 * a.dot(s_.A * a) + a.dot(s_.C * b);
  }

  Vector outer_mean_grad1(const Vector& a, const Vector& b) const override {
    if (s_.mode == CompositionMode::OnDual) return s_.C * b;
    return s_.A * a + s_.C * b;
  }

  Vector outer_mean_grad2(const Vector& a, const Vector& b) const override {
    if (s_.mode == CompositionMode::OnDual) return s_.C.transpose() * a + s_.A * b;
    return s_.C.transpose() * a;
  }

  double h_value(const Vector& x) const override { return 0.5 * s_.mu_x * x.squaredNorm(); }
  Vector h_grad(const Vector& x) const override { return s_.mu_x * x; }
  double r_value(const Vector& y) const override { return 0.5 * s_.mu_y * y.squaredNorm(); }
  Vector r_grad(const Vector& y) const override { return s_.mu_y * y; }

  Vector r_implicit_step(const Vector& v, double eta) const override {
    const double denom = 1.0 + eta * s_.mu_y;
    if (denom <= 0.0) return Problem::r_implicit_step(v, eta);
    return v / denom;
  }

 private:
  void require_composed() const {
    if (s_.mode == CompositionMode::None) throw ModeError("quad: no inner map without composition");
  }

  QuadCompositionalSpec s_;
  Vector b_;
};

// ---- AUC toy -------------------------------------------------------------------------

class AucToy final : public SuiteProblem {
 public:
  AucToy(const AucToySpec& s, Rng& rng) : s_(s) {
    if (s.n < 2 || s.d < 1) throw ParameterError("auc_toy: need n >= 2 and d >= 1");
    if (!(s.imratio > 0.0 && s.imratio < 1.0)) throw ParameterError("auc_toy: imratio must be in (0, 1)");
    if (!(s.theta_bound > 0.0) || !(s.spread > 0.0) || !(s.alpha_inner >= 0.0)) {
      throw ParameterError("auc_toy: theta_bound and spread must be positive, alpha_inner nonnegative");
    }
    const int n_pos = static_cast<int>(std::lround(s.imratio * s.n));
    if (n_pos < 1 || n_pos >= s.n) throw DataError("auc_toy: one class is empty at this imratio");

    const Vector dir = Vector::Ones(s.d) / std::sqrt(static_cast<double>(s.d));
    X_.resize(s.n, s.d);
    labels_.resize(s.n);
    for (int i = 0; i < s.n; ++i) {
      const double label = i < n_pos ? 1.0 : -1.0;
      labels_(i) = label;
      X_.row(i) = (label * s.separation * dir + s.spread * gaussian(s.d, rng)).transpose();
    }
    n_pos_ = n_pos;
    p_ = static_cast<double>(n_pos) / s.n;

    const auto pos = X_.topRows(n_pos);
    const auto neg = X_.bottomRows(s.n - n_pos);
    mean_pos_ = pos.colwise().mean().transpose();
    mean_neg_ = neg.colwise().mean().transpose();
    S_pos_ = pos.transpose() * pos / n_pos;
    S_neg_ = neg.transpose() * neg / (s.n - n_pos);
    Sxx_ = X_.transpose() * X_ / s.n;
    sxy_ = X_.transpose() * labels_ / s.n;

    name_ = "auc_toy";
    dom_x_ = DomainSpec::unconstrained();
    dom_y_ = DomainSpec::box(1, -s.theta_bound, s.theta_bound);
    meta_.d_x = s.d + 2;
    meta_.d_y = 1;
    meta_.d_z = s.d + 2;
    meta_.mode = CompositionMode::OnPrimal;
    meta_.mu_sc_y = 2.0 * p_ * (1.0 - p_);
    const double jac = std::max(1.0, spectral_norm(Matrix::Identity(s.d, s.d) - s.alpha_inner * Sxx_));
    const double curv = 2.0 * (1.0 + std::max(sym_max_eig(S_pos_), sym_max_eig(S_neg_)));
    meta_.L = curv * jac * jac + 2.0 * jac * (mean_pos_.norm() + mean_neg_.norm()) + meta_.mu_sc_y;
    meta_.has_closed_form_g = true;
    meta_.concave_in_y = true;
    meta_.sigma = s.spread;
    set_diameters();
  }

  Vector inner(const Vector& v, std::uint64_t draw) const override {
    const auto i = static_cast<Eigen::Index>(draw % static_cast<std::uint64_t>(s_.n));
    const auto x = X_.row(i).transpose();
    Vector out = v;
    const Vector w = v.head(s_.d);
    out.head(s_.d) = w - s_.alpha_inner * (w.dot(x) - labels_(i)) * x;
    return out;
  }

  Matrix inner_jacobian(const Vector&, std::uint64_t draw) const override {
    const auto i = static_cast<Eigen::Index>(draw % static_cast<std::uint64_t>(s_.n));
    const Vector x = X_.row(i).transpose();
    Matrix J = Matrix::Identity(meta_.d_z, meta_.d_x);
    J.topLeftCorner(s_.d, s_.d) -= s_.alpha_inner * x * x.transpose();
    return J;
  }

  Vector inner_mean(const Vector& v) const override {
    Vector out = v;
    const Vector w = v.head(s_.d);
    out.head(s_.d) = w - s_.alpha_inner * (Sxx_ * w - sxy_);
    return out;
  }

  Matrix inner_mean_jacobian(const Vector&) const override {
    Matrix J = Matrix::Identity(meta_.d_z, meta_.d_x);
    J.topLeftCorner(s_.d, s_.d) -= s_.alpha_inner * Sxx_;
    return J;
  }

  // Per-sample objective; labels +1 / -1, linear score s = w'x:
  //   (1-p)(s-a)^2 [y=1] + p(s-b)^2 [y=-1]
  //   + 2(1+theta)(p s [y=-1] - (1-p) s [y=1]) - p(1-p) theta^2
  double outer_value(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    const auto i = sample_index(draw);
    const double s = score(a, i);
    const double th = b(0);
    const double q = p_;
    if (labels_(i) > 0) {
      return (1 - q) * sq(s - a(s_.d)) - 2 * (1 + th) * (1 - q) * s - q * (1 - q) * th * th;
    }
    return q * sq(s - a(s_.d + 1)) + 2 * (1 + th) * q * s - q * (1 - q) * th * th;
  }

  Vector outer_grad1(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    const auto i = sample_index(draw);
    const double s = score(a, i);
    const double th = b(0);
    const double q = p_;
    Vector g = Vector::Zero(a.size());
    double ds = 0.0;
    if (labels_(i) > 0) {
      ds = 2 * (1 - q) * (s - a(s_.d)) - 2 * (1 + th) * (1 - q);
      g(s_.d) = -2 * (1 - q) * (s - a(s_.d));
    } else {
      ds = 2 * q * (s - a(s_.d + 1)) + 2 * (1 + th) * q;
      g(s_.d + 1) = -2 * q * (s - a(s_.d + 1));
    }
    g.head(s_.d) = ds * X_.row(i).transpose();
    return g;
  }

  Vector outer_grad2(const Vector& a, const Vector& b, std::uint64_t draw) const override {
    const auto i = sample_index(draw);
    const double s = score(a, i);
    const double q = p_;
    const double lin = labels_(i) > 0 ? -2 * (1 - q) * s : 2 * q * s;
    return Vector::Constant(1, lin - 2 * q * (1 - q) * b(0));
  }

  double outer_mean_value(const Vector& a, const Vector& b) const override {
    const Vector w = a.head(s_.d);
    const double za = a(s_.d), zb = a(s_.d + 1), th = b(0), q = p_;
    const double mp = w.dot(mean_pos_), mn = w.dot(mean_neg_);
    const double Qp = w.dot(S_pos_ * w), Qn = w.dot(S_neg_ * w);
    const double pp = pi_pos(), pn = 1.0 - pp;
    return pp * ((1 - q) * (Qp - 2 * za * mp + za * za) - 2 * (1 + th) * (1 - q) * mp) +
           pn * (q * (Qn - 2 * zb * mn + zb * zb) + 2 * (1 + th) * q * mn) - q * (1 - q) * th * th;
  }

  Vector outer_mean_grad1(const Vector& a, const Vector& b) const override {
    const Vector w = a.head(s_.d);
    const double za = a(s_.d), zb = a(s_.d + 1), th = b(0), q = p_;
    const double pp = pi_pos(), pn = 1.0 - pp;
    Vector g(a.size());
    g.head(s_.d) = pp * ((1 - q) * (2 * S_pos_ * w - 2 * za * mean_pos_) - 2 * (1 + th) * (1 - q) * mean_pos_) +
                   pn * (q * (2 * S_neg_ * w - 2 * zb * mean_neg_) + 2 * (1 + th) * q * mean_neg_);
    g(s_.d) = pp * (1 - q) * (2 * za - 2 * w.dot(mean_pos_));
    g(s_.d + 1) = pn * q * (2 * zb - 2 * w.dot(mean_neg_));
    return g;
  }

  Vector outer_mean_grad2(const Vector& a, const Vector& b) const override {
    const Vector w = a.head(s_.d);
    const double q = p_;
    const double pp = pi_pos(), pn = 1.0 - pp;
    return Vector::Constant(1, -2 * pp * (1 - q) * w.dot(mean_pos_) + 2 * pn * q * w.dot(mean_neg_) -
                                   2 * q * (1 - q) * b(0));
  }

  double auc(const Vector& w) const {
    require_dim(w, s_.d, "training_auc");
    const Vector scores = X_ * w;
    std::vector<std::pair<double, bool>> ranked;
    ranked.reserve(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i) ranked.emplace_back(scores(i), labels_(i) > 0);
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    // Mann-Whitney: sum of positive ranks with ties sharing their mean rank.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < ranked.size()) {
      std::size_t j = i;
      while (j < ranked.size() && ranked[j].first == ranked[i].first) ++j;
      const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t k = i; k < j; ++k) {
        if (ranked[k].second) rank_sum += mean_rank;
      }
      i = j;
    }
    const double np = n_pos_;
    const double nn = s_.n - n_pos_;
    return (rank_sum - np * (np + 1) / 2.0) / (np * nn);
  }

 private:
  Eigen::Index sample_index(std::uint64_t draw) const {
    return static_cast<Eigen::Index>(draw % static_cast<std::uint64_t>(s_.n));
  }
  double score(const Vector& a, Eigen::Index i) const { return X_.row(i).dot(a.head(s_.d)); }
  double pi_pos() const { return static_cast<double>(n_pos_) / s_.n; }

  AucToySpec s_;
  Matrix X_;
  Vector labels_;
  int n_pos_ = 0;
  double p_ = 0.0;
  Vector mean_pos_, mean_neg_;
  Matrix S_pos_, S_neg_, Sxx_;
  Vector sxy_;
};

// ---- robust weights ---------------------------------------------------------------

class RobustWeights final : public SuiteProblem {
 public:
  explicit RobustWeights(RobustWeightsSpec s) : s_(std::move(s)) {
    const std::size_t n = s_.H.size();
    if (n < 2) throw ParameterError("robust_weights: need at least two tasks");
    if (s_.centers.size() != n) throw ShapeError("robust_weights: one center per task");
    if (!(s_.eta >= 0.0) || !(s_.noise_sigma >= 0.0)) {
      throw ParameterError("robust_weights: eta and noise_sigma must be nonnegative");
    }
    d_ = s_.centers[0].size();
    if (d_ < 1) throw ShapeError("robust_weights: empty task dimension");
    double hmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (s_.H[i].rows() != d_ || s_.H[i].cols() != d_ || s_.centers[i].size() != d_) {
        throw ShapeError("robust_weights: task data of inconsistent dimension");
      }
      if (sym_min_eig(s_.H[i]) < 0.0) throw ParameterError("robust_weights: task Hessians must be PSD");
      hmax = std::max(hmax, sym_max_eig(s_.H[i]));
      J_.push_back(Matrix::Identity(d_, d_) - s_.eta * s_.H[i]);
    }
    name_ = "robust_weights";
    dom_x_ = DomainSpec::unconstrained();
    dom_y_ = DomainSpec::simplex(static_cast<Eigen::Index>(n));
    meta_.d_x = d_;
    meta_.d_y = static_cast<Eigen::Index>(n);
    meta_.d_z = static_cast<Eigen::Index>(n) * d_;
    meta_.mode = CompositionMode::OnPrimal;
    const double jac = std::max(1.0, 1.0 + s_.eta * hmax);
    meta_.L = hmax * jac * jac * (1.0 + std::sqrt(static_cast<double>(n)));
    meta_.sigma = s_.noise_sigma;
    meta_.has_closed_form_g = true;
    meta_.concave_in_y = true;
    set_diameters();
  }

  Vector inner(const Vector& w, std::uint64_t draw) const override {
    Vector out = inner_mean(w);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      out -= s_.eta * s_.noise_sigma * token_normals(ts, out.size());
    }
    return out;
  }

  Matrix inner_jacobian(const Vector&, std::uint64_t) const override { return jacobian(); }
  Matrix inner_mean_jacobian(const Vector&) const override { return jacobian(); }

  Vector inner_vjp(const Vector&, std::uint64_t, const Vector& v) const override {
    Vector out = Vector::Zero(d_);
    for (std::size_t i = 0; i < J_.size(); ++i) {
      const auto block = v.segment(static_cast<Eigen::Index>(i) * d_, d_);
      out += s_.first_order ? Vector(block) : Vector(J_[i].transpose() * block);
    }
    return out;
  }

  Vector inner_mean(const Vector& w) const override {
    Vector out(meta_.d_z);
    for (std::size_t i = 0; i < J_.size(); ++i) {
      out.segment(static_cast<Eigen::Index>(i) * d_, d_) = w - s_.eta * s_.H[i] * (w - s_.centers[i]);
    }
    return out;
  }

  double outer_value(const Vector& z, const Vector& alpha, std::uint64_t) const override {
    return outer_mean_value(z, alpha);
  }
  Vector outer_grad1(const Vector& z, const Vector& alpha, std::uint64_t) const override {
    return outer_mean_grad1(z, alpha);
  }
  Vector outer_grad2(const Vector& z, const Vector& alpha, std::uint64_t) const override {
    return outer_mean_grad2(z, alpha);
  }

  double outer_mean_value(const Vector& z, const Vector& alpha) const override {
    return alpha.dot(task_losses(z));
  }

  Vector outer_mean_grad1(const Vector& z, const Vector& alpha) const override {
    Vector g(z.size());
    for (std::size_t i = 0; i < J_.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      g.segment(k * d_, d_) = alpha(k) * s_.H[i] * (z.segment(k * d_, d_) - s_.centers[i]);
    }
    return g;
  }

  Vector outer_mean_grad2(const Vector& z, const Vector&) const override { return task_losses(z); }

 private:
  Vector task_losses(const Vector& z) const {
    Vector l(static_cast<Eigen::Index>(J_.size()));
    for (std::size_t i = 0; i < J_.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const Vector e = z.segment(k * d_, d_) - s_.centers[i];
      l(k) = 0.5 * e.dot(s_.H[i] * e);
    }
    return l;
  }

  Matrix jacobian() const {
    Matrix J(meta_.d_z, d_);
    for (std::size_t i = 0; i < J_.size(); ++i) {
      J.middleRows(static_cast<Eigen::Index>(i) * d_, d_) =
          s_.first_order ? Matrix::Identity(d_, d_) : J_[i];
    }
    return J;
  }

  RobustWeightsSpec s_;
  Eigen::Index d_ = 0;
  std::vector<Matrix> J_;
};

// ---- mixture weights ---------------------------------------------------------------

class MixtureWeights final : public SuiteProblem {
 public:
  explicit MixtureWeights(MixtureWeightsSpec s) : s_(std::move(s)) {
    const std::size_t n = s_.H.size();
    if (n < 2) throw ParameterError("mixture_weights: need at least two sources");
    d_ = s_.target_center.size();
    if (d_ < 1 || s_.H_target.rows() != d_ || s_.H_target.cols() != d_) {
      throw ShapeError("mixture_weights: target data of inconsistent dimension");
    }
    if (s_.centers.size() != n || s_.m.size() != static_cast<Eigen::Index>(n)) {
      throw ShapeError("mixture_weights: one center and one weight per source");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (s_.H[i].rows() != d_ || s_.H[i].cols() != d_ || s_.centers[i].size() != d_) {
        throw ShapeError("mixture_weights: source data of inconsistent dimension");
      }
    }
    if (!(s_.m.minCoeff() > 0.0)) throw ParameterError("mixture_weights: m must be positive");
    if (!(s_.lambda >= 0.0) || !(s_.c_smooth > 0.0) || !(s_.radius > 0.0) || !(s_.noise_sigma >= 0.0)) {
      throw ParameterError("mixture_weights: need lambda >= 0, c_smooth > 0, radius > 0, noise >= 0");
    }
    name_ = "mixture_weights";
    dom_x_ = DomainSpec::simplex(static_cast<Eigen::Index>(n));
    dom_y_ = DomainSpec::ball(Vector::Zero(d_), s_.radius);
    meta_.d_x = static_cast<Eigen::Index>(n);
    meta_.d_y = d_;
    meta_.d_z = static_cast<Eigen::Index>(n);
    meta_.mode = CompositionMode::OnDual;
    meta_.mu_sc_x = 2.0 * s_.lambda * s_.m.minCoeff();
    // Bounds of |grad g_i| and |hess g_i| on the ball give the smoothness estimate.
    double lip = 0.0;
    double curv = 0.0;
    const double ht = spectral_norm(s_.H_target);
    for (std::size_t i = 0; i < n; ++i) {
      const double hi = spectral_norm(s_.H[i]);
      lip = std::max(lip, (ht + hi) * s_.radius + (s_.H_target * s_.target_center).norm() +
                              (s_.H[i] * s_.centers[i]).norm());
      curv = std::max(curv, spectral_norm(s_.H_target - s_.H[i]));
    }
    const double sqn = std::sqrt(static_cast<double>(n));
    meta_.rho_weak = sqn * (curv + lip * lip / std::sqrt(s_.c_smooth));
    meta_.L = 2.0 * s_.lambda * s_.m.maxCoeff() + meta_.rho_weak + sqn * lip;
    meta_.sigma = s_.noise_sigma;
    meta_.has_closed_form_g = true;
    meta_.concave_in_y = false;
    set_diameters();
  }

  Vector inner(const Vector& w, std::uint64_t draw) const override {
    Vector out = inner_mean(w);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      out += s_.noise_sigma * token_normals(ts, out.size());
    }
    return out;
  }

  Matrix inner_jacobian(const Vector& w, std::uint64_t) const override { return inner_mean_jacobian(w); }

  Vector inner_mean(const Vector& w) const override {
    const double lt = loss(s_.H_target, s_.target_center, w);
    Vector out(meta_.d_z);
    for (std::size_t i = 0; i < s_.H.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = lt - loss(s_.H[i], s_.centers[i], w);
    }
    return out;
  }

  Matrix inner_mean_jacobian(const Vector& w) const override {
    const Vector gt = s_.H_target * (w - s_.target_center);
    Matrix J(meta_.d_z, d_);
    for (std::size_t i = 0; i < s_.H.size(); ++i) {
      J.row(static_cast<Eigen::Index>(i)) = (gt - s_.H[i] * (w - s_.centers[i])).transpose();
    }
    return J;
  }

  double outer_value(const Vector& a, const Vector& z, std::uint64_t) const override {
    return outer_mean_value(a, z);
  }
  Vector outer_grad1(const Vector& a, const Vector& z, std::uint64_t) const override {
    return outer_mean_grad1(a, z);
  }
  Vector outer_grad2(const Vector& a, const Vector& z, std::uint64_t) const override {
    return outer_mean_grad2(a, z);
  }

  double outer_mean_value(const Vector& alpha, const Vector& z) const override {
    return alpha.dot(smooth_abs(z));
  }
  Vector outer_mean_grad1(const Vector&, const Vector& z) const override { return smooth_abs(z); }
  Vector outer_mean_grad2(const Vector& alpha, const Vector& z) const override {
    return alpha.cwiseProduct(z).cwiseQuotient(smooth_abs(z));
  }

  double h_value(const Vector& alpha) const override {
    return s_.lambda * alpha.dot(s_.m.cwiseProduct(alpha));
  }
  Vector h_grad(const Vector& alpha) const override {
    return 2.0 * s_.lambda * s_.m.cwiseProduct(alpha);
  }

 private:
  static double loss(const Matrix& H, const Vector& c, const Vector& w) {
    const Vector e = w - c;
    return 0.5 * e.dot(H * e);
  }

  Vector smooth_abs(const Vector& z) const {
    return (z.array().square() + s_.c_smooth).sqrt().matrix();
  }

  MixtureWeightsSpec s_;
  Eigen::Index d_ = 0;
};

// ---- constraint penalty -------------------------------------------------------------

class ConstraintPenalty final : public SuiteProblem {
 public:
  explicit ConstraintPenalty(ConstraintPenaltySpec s) : s_(std::move(s)) {
    const Eigen::Index d = s_.x_center.size();
    if (d < 1 || s_.P.cols() != d || s_.P.rows() < 1 || s_.q.size() != s_.P.rows()) {
      throw ShapeError("constraint_penalty: P must be m x d and q must have m entries");
    }
    if (!(s_.lambda_max >= 0.0) || !(s_.noise_sigma >= 0.0) || !std::isfinite(s_.kappa)) {
      throw ParameterError("constraint_penalty: need lambda_max >= 0, noise >= 0, finite kappa");
    }
    name_ = "constraint_penalty";
    dom_x_ = DomainSpec::unconstrained();
    dom_y_ = DomainSpec::box(1, 0.0, s_.lambda_max);
    meta_.d_x = d;
    meta_.d_y = 1;
    meta_.d_z = s_.P.rows();
    meta_.mode = CompositionMode::OnPrimal;
    meta_.mu_sc_x = 1.0;
    const double pn = spectral_norm(s_.P);
    meta_.L = 1.0 + s_.lambda_max * pn * pn + pn * ((s_.P * s_.x_center + s_.q).norm() + 1.0);
    meta_.sigma = s_.noise_sigma;
    meta_.has_closed_form_g = true;
    meta_.concave_in_y = true;
    set_diameters();
    saddle_ = solve_saddle();
    meta_.has_true_saddle = true;
  }

  Vector inner(const Vector& x, std::uint64_t draw) const override {
    Vector out = inner_mean(x);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      out += s_.noise_sigma * token_normals(ts, out.size());
    }
    return out;
  }
  Matrix inner_jacobian(const Vector&, std::uint64_t) const override { return s_.P; }
  Vector inner_vjp(const Vector&, std::uint64_t, const Vector& v) const override {
    return s_.P.transpose() * v;
  }
  Vector inner_mean(const Vector& x) const override { return s_.P * x + s_.q; }
  Matrix inner_mean_jacobian(const Vector&) const override { return s_.P; }

  double outer_value(const Vector& z, const Vector& lam, std::uint64_t) const override {
    return outer_mean_value(z, lam);
  }
  Vector outer_grad1(const Vector& z, const Vector& lam, std::uint64_t) const override {
    return outer_mean_grad1(z, lam);
  }
  Vector outer_grad2(const Vector& z, const Vector& lam, std::uint64_t) const override {
    return outer_mean_grad2(z, lam);
  }
  double outer_mean_value(const Vector& z, const Vector& lam) const override {
    return lam(0) * (0.5 * z.squaredNorm() - s_.kappa);
  }
  Vector outer_mean_grad1(const Vector& z, const Vector& lam) const override { return lam(0) * z; }
  Vector outer_mean_grad2(const Vector& z, const Vector&) const override {
    return Vector::Constant(1, 0.5 * z.squaredNorm() - s_.kappa);
  }

  double h_value(const Vector& x) const override { return 0.5 * (x - s_.x_center).squaredNorm(); }
  Vector h_grad(const Vector& x) const override { return x - s_.x_center; }

 private:
  Vector x_of(double lam) const {
    const Eigen::Index d = s_.x_center.size();
    const Matrix K = Matrix::Identity(d, d) + lam * s_.P.transpose() * s_.P;
    return K.ldlt().solve(s_.x_center - lam * s_.P.transpose() * s_.q);
  }

  double slack(double lam) const { return 0.5 * (s_.P * x_of(lam) + s_.q).squaredNorm() - s_.kappa; }

  // x(lambda) minimizes the Lagrangian; the constraint value along it is
  // nonincreasing in lambda, so the multiplier is found by bisection.
  PrimalDualPoint solve_saddle() const {
    double lam = 0.0;
    if (slack(0.0) > 0.0) {
      if (slack(s_.lambda_max) >= 0.0) {
        lam = s_.lambda_max;
      } else {
        double lo = 0.0, hi = s_.lambda_max;
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          (slack(mid) > 0.0 ? lo : hi) = mid;
        }
        lam = 0.5 * (lo + hi);
      }
    }
    return {x_of(lam), Vector::Constant(1, lam)};
  }

  ConstraintPenaltySpec s_;
};

// ---- WCWC toy ------------------------------------------------------------------------

class WcwcToy final : public SuiteProblem {
 public:
  explicit WcwcToy(WcwcToySpec s) : s_(std::move(s)) {
    d_ = s_.K.rows();
    if (d_ < 1 || s_.K.cols() != d_ || s_.D.size() != 2 * d_) {
      throw ShapeError("wcwc_toy: K must be d x d and D must have 2d entries");
    }
    if (!(s_.D.minCoeff() > 0.0)) throw ParameterError("wcwc_toy: D must be positive");
    if (!(s_.perturbation >= 0.0) || !(s_.radius > 0.0) || !(s_.noise_sigma >= 0.0)) {
      throw ParameterError("wcwc_toy: need perturbation >= 0, radius > 0, noise >= 0");
    }
    if (s_.D.maxCoeff() * s_.radius > M_PI) {
      throw ParameterError("wcwc_toy: max(D) * radius must not exceed pi");
    }
    name_ = "wcwc_toy";
    dom_x_ = DomainSpec::box(d_, -s_.radius, s_.radius);
    dom_y_ = DomainSpec::box(d_, -s_.radius, s_.radius);
    meta_.d_x = d_;
    meta_.d_y = d_;
    meta_.d_z = 2 * d_;
    meta_.mode = CompositionMode::OnBoth;
    const double dmax2 = sq(s_.D.maxCoeff());
    meta_.rho_weak = s_.perturbation * dmax2;
    meta_.L = dmax2 * (spectral_norm(s_.K) + s_.perturbation);
    meta_.sigma = s_.noise_sigma;
    meta_.has_closed_form_g = true;
    set_diameters();
    saddle_ = PrimalDualPoint{Vector::Zero(d_), Vector::Zero(d_)};
    meta_.has_true_saddle = true;
  }

  Vector inner(const Vector& w, std::uint64_t draw) const override {
    Vector out = inner_mean(w);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      out += s_.noise_sigma * token_normals(ts, out.size());
    }
    return out;
  }
  Matrix inner_jacobian(const Vector&, std::uint64_t) const override { return Matrix(s_.D.asDiagonal()); }
  Vector inner_vjp(const Vector&, std::uint64_t, const Vector& v) const override {
    return s_.D.cwiseProduct(v);
  }
  Vector inner_mean(const Vector& w) const override { return s_.D.cwiseProduct(w); }
  Matrix inner_mean_jacobian(const Vector&) const override { return Matrix(s_.D.asDiagonal()); }

  double outer_value(const Vector& z, const Vector& b, std::uint64_t draw) const override {
    double v = outer_mean_value(z, b);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      v += s_.noise_sigma * token_normals(ts, z.size()).dot(z);
    }
    return v;
  }
  Vector outer_grad1(const Vector& z, const Vector& b, std::uint64_t draw) const override {
    Vector g = outer_mean_grad1(z, b);
    if (s_.noise_sigma > 0.0) {
      TokenStream ts(draw);
      g += s_.noise_sigma * token_normals(ts, z.size());
    }
    return g;
  }
  Vector outer_grad2(const Vector&, const Vector&, std::uint64_t) const override {
    throw ModeError("wcwc_toy: the outer map takes a single argument");
  }

  double outer_mean_value(const Vector& z, const Vector&) const override {
    const auto zx = z.head(d_);
    const auto zy = z.tail(d_);
    return zx.dot(s_.K * zy) - s_.perturbation * zx.array().cos().sum() +
           s_.perturbation * zy.array().cos().sum();
  }
  Vector outer_mean_grad1(const Vector& z, const Vector&) const override {
    const auto zx = z.head(d_);
    const auto zy = z.tail(d_);
    Vector g(2 * d_);
    g.head(d_) = s_.K * zy + s_.perturbation * zx.array().sin().matrix();
    g.tail(d_) = s_.K.transpose() * zx - s_.perturbation * zy.array().sin().matrix();
    return g;
  }
  Vector outer_mean_grad2(const Vector&, const Vector&) const override {
    throw ModeError("wcwc_toy: the outer map takes a single argument");
  }

 private:
  WcwcToySpec s_;
  Eigen::Index d_ = 0;
};

// ---- registry helpers ---------------------------------------------------------------

std::uint64_t seed_param(const ProblemParams& p) {
  const double s = p.at("seed");
  if (!(s >= 0.0) || s != std::floor(s)) throw ParameterError("problem.seed must be a nonnegative integer");
  return static_cast<std::uint64_t>(s);
}

int int_param(const ProblemParams& p, const std::string& key, int min_value) {
  const double v = p.at(key);
  if (v != std::floor(v) || v < min_value || v > 1e6) {
    throw ParameterError("problem." + key + " must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<int>(v);
}

bool flag_param(const ProblemParams& p, const std::string& key) {
  const double v = p.at(key);
  if (v != 0.0 && v != 1.0) throw ParameterError("problem." + key + " must be 0 or 1");
  return v == 1.0;
}

Rng data_rng(const ProblemParams& p) { return make_rng(seed_param(p), Stream::ProblemData); }

ProblemPtr quad_entry(const ProblemParams& p, CompositionMode mode, QuadRegime regime,
                      const std::string& name) {
  Rng rng = data_rng(p);
  auto spec = random_quad_spec(mode, regime, int_param(p, "d_x", 1), int_param(p, "d_y", 1),
                               p.at("noise_sigma"), rng);
  spec.name = name;
  return make_quad(spec);
}

}  // namespace

// ---- public constructors -----------------------------------------------------------

QuadraticForm quad_form(const QuadCompositionalSpec& s) {
  validate_quad(s);
  const Eigen::Index dx = s.d_x;
  const Eigen::Index dy = s.d_y;
  const Eigen::Index n = dx + dy;
  const Vector b = s.b.size() ? s.b : Vector::Zero(quad_dz(s));
  QuadraticForm q{Matrix::Zero(n, n), Vector::Zero(n)};
  auto Hxx = q.H.topLeftCorner(dx, dx);
  auto Hxy = q.H.topRightCorner(dx, dy);
  auto Hyy = q.H.bottomRightCorner(dy, dy);
  switch (s.mode) {
    case CompositionMode::OnPrimal:
      Hxx = s.B.transpose() * s.A * s.B;
      Hxy = s.B.transpose() * s.C;
      q.c.head(dx) = s.B.transpose() * s.A * b;
      q.c.tail(dy) = s.C.transpose() * b;
      break;
    case CompositionMode::OnDual:
      Hxy = s.C * s.B;
      Hyy = s.B.transpose() * s.A * s.B;
      q.c.head(dx) = s.C * b;
      q.c.tail(dy) = s.B.transpose() * s.A * b;
      break;
    case CompositionMode::OnBoth:
      q.H = s.B.transpose() * s.A * s.B;
      q.c = s.B.transpose() * s.A * b;
      break;
    case CompositionMode::None:
      Hxx = s.A;
      Hxy = s.C;
      break;
  }
  q.H.bottomLeftCorner(dy, dx) = q.H.topRightCorner(dx, dy).transpose();
  q.H.topLeftCorner(dx, dx).diagonal().array() += s.mu_x;
  q.H.bottomRightCorner(dy, dy).diagonal().array() -= s.mu_y;
  return q;
}

ProblemPtr make_quad(const QuadCompositionalSpec& spec) { return std::make_shared<Quad>(spec); }

PrimalDualPoint make_quad_saddle(const QuadCompositionalSpec& spec) {
  if (spec.domain_x.bounded() || spec.domain_y.bounded()) {
    throw ParameterError("make_quad_saddle: domains must be unconstrained");
  }
  const QuadraticForm q = quad_form(spec);
  Eigen::FullPivLU<Matrix> lu(q.H);
  if (!lu.isInvertible()) throw DegeneracyError("make_quad_saddle: singular stationarity system");
  const Vector w = lu.solve(-q.c);
  return PrimalDualPoint::split(w, spec.d_x);
}

QuadCompositionalSpec random_quad_spec(CompositionMode mode, QuadRegime regime, Eigen::Index d_x,
                                       Eigen::Index d_y, double noise_sigma, Rng& rng) {
  if (d_x < 1 || d_y < 1) throw ParameterError("random_quad_spec: dimensions must be positive");
  QuadCompositionalSpec s;
  s.mode = mode;
  s.d_x = d_x;
  s.d_y = d_y;
  s.noise_sigma = noise_sigma;
  auto near_identity = [&](Eigen::Index n, double scale) {
    return Matrix(Matrix::Identity(n, n) + scale * gaussian(n, n, rng) / std::sqrt(double(n)));
  };
  switch (mode) {
    case CompositionMode::OnPrimal: {
      if (regime == QuadRegime::ScSc) {
        s.A = random_spd(d_x, 0.5, 1.5, rng);
        s.B = near_identity(d_x, 0.3);
        s.b = 0.5 * gaussian(d_x, rng);
        s.C = 0.5 * gaussian(d_x, d_y, rng) / std::sqrt(double(d_y));
        s.mu_x = 0.2;
        s.mu_y = 1.0;
        break;
      }
      // Nonconvex in x, strongly concave in y, strongly convex primal function.
      // Redraw until both properties hold with margin.
      s.mu_x = -1.0;
      s.mu_y = 1.0;
      for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw ConstructionError("random_quad_spec: no NC-SC draw found");
        s.A = random_spd(d_x, 0.2, 1.5, rng);
        s.B = near_identity(d_x, 0.2);
        s.b = 0.5 * gaussian(d_x, rng);
        const Matrix Q = random_orthogonal(std::max(d_x, d_y), rng);
        s.C = 1.2 * Q.topLeftCorner(d_x, d_y);
        const QuadraticForm q = quad_form(s);
        const Matrix hxx = q.H.topLeftCorner(d_x, d_x);
        const Matrix hxy = q.H.topRightCorner(d_x, d_y);
        const Matrix schur = hxx + hxy * hxy.transpose() / s.mu_y;
        if (sym_min_eig(hxx) < -0.1 && sym_min_eig(schur) > 0.1) break;
      }
      break;
    }
    case CompositionMode::OnDual: {
      s.C = 0.5 * gaussian(d_x, d_y, rng) / std::sqrt(double(d_y));
      s.B = near_identity(d_y, 0.3);
      s.b = 0.5 * gaussian(d_y, rng);
      s.mu_x = 1.0;
      if (regime == QuadRegime::ScSc) {
        s.A = -random_spd(d_y, 0.5, 1.5, rng);
        s.mu_y = 0.2;
      } else {
        // Strongly convex in x, nonconcave in y; Y bounded so the max is attained.
        s.A = random_spd(d_y, 0.5, 1.5, rng);
        s.mu_y = 0.5 * sym_max_eig(s.B.transpose() * s.A * s.B);
        s.domain_y = DomainSpec::ball(Vector::Zero(d_y), 2.0);
      }
      break;
    }
    case CompositionMode::OnBoth: {
      if (regime != QuadRegime::ScSc) throw ParameterError("random_quad_spec: OnBoth supports ScSc only");
      const Eigen::Index dz = d_x + d_y;
      s.A = Matrix::Zero(dz, dz);
      s.A.topLeftCorner(d_x, d_x) = random_spd(d_x, 0.5, 1.5, rng);
      s.A.bottomRightCorner(d_y, d_y) = -random_spd(d_y, 0.5, 1.5, rng);
      const Matrix K = 0.5 * gaussian(d_x, d_y, rng);
      s.A.topRightCorner(d_x, d_y) = K;
      s.A.bottomLeftCorner(d_y, d_x) = K.transpose();
      s.B = Matrix::Zero(dz, dz);
      s.B.topLeftCorner(d_x, d_x) = near_identity(d_x, 0.2);
      s.B.bottomRightCorner(d_y, d_y) = near_identity(d_y, 0.2);
      s.b = 0.5 * gaussian(dz, rng);
      s.C = Matrix(dz, 0);
      s.mu_x = 0.1;
      s.mu_y = 0.1;
      break;
    }
    case CompositionMode::None: {
      s.A = regime == QuadRegime::ScSc ? random_spd(d_x, 0.5, 1.5, rng) : Matrix(random_spd(d_x, 0.2, 1.5, rng));
      s.B = Matrix();
      s.b = Vector();
      s.C = 0.5 * gaussian(d_x, d_y, rng) / std::sqrt(double(d_y));
      s.mu_x = regime == QuadRegime::ScSc ? 0.2 : -1.0;
      s.mu_y = 1.0;
      break;
    }
  }
  return s;
}

ProblemPtr make_auc_toy(const AucToySpec& spec, Rng& rng) { return std::make_shared<AucToy>(spec, rng); }

double training_auc(const Problem& problem, const Vector& w) {
  const auto* toy = dynamic_cast<const AucToy*>(&problem);
  if (toy == nullptr) throw ParameterError("training_auc: not an AUC toy problem");
  return toy->auc(w);
}

ProblemPtr make_robust_weights(const RobustWeightsSpec& spec) {
  return std::make_shared<RobustWeights>(spec);
}

ProblemPtr make_robust_weights(int n_tasks, int d, Rng& rng, double noise_sigma, bool first_order) {
  if (n_tasks < 2 || d < 1) throw ParameterError("make_robust_weights: need n_tasks >= 2 and d >= 1");
  RobustWeightsSpec s;
  for (int i = 0; i < n_tasks; ++i) {
    s.H.push_back(random_spd(d, 0.5, 2.0, rng));
    s.centers.push_back(1.5 * gaussian(d, rng));
  }
  s.eta = 0.1;
  s.noise_sigma = noise_sigma;
  s.first_order = first_order;
  return make_robust_weights(s);
}

ProblemPtr make_mixture_weights(const MixtureWeightsSpec& spec) {
  return std::make_shared<MixtureWeights>(spec);
}

ProblemPtr make_mixture_weights(int n_sources, int d, Rng& rng, double noise_sigma) {
  if (n_sources < 2 || d < 1) throw ParameterError("make_mixture_weights: need n_sources >= 2 and d >= 1");
  MixtureWeightsSpec s;
  s.H_target = random_spd(d, 0.5, 1.5, rng);
  s.target_center = 0.5 * gaussian(d, rng);
  s.m.resize(n_sources);
  for (int i = 0; i < n_sources; ++i) {
    s.H.push_back(random_spd(d, 0.5, 1.5, rng));
    s.centers.push_back(s.target_center + 0.3 * (i + 1) * gaussian(d, rng) / std::sqrt(double(d)));
    s.m(i) = rng.uniform(0.5, 2.0);
  }
  s.noise_sigma = noise_sigma;
  return make_mixture_weights(s);
}

ProblemPtr make_constraint_penalty(const ConstraintPenaltySpec& spec) {
  return std::make_shared<ConstraintPenalty>(spec);
}

ProblemPtr make_constraint_penalty(int d, Rng& rng, double noise_sigma, bool feasible) {
  if (d < 1) throw ParameterError("make_constraint_penalty: d must be positive");
  ConstraintPenaltySpec s;
  s.x_center = gaussian(d, rng);
  s.P = gaussian(d, d, rng) / std::sqrt(double(d));
  s.q = 0.5 * gaussian(d, rng);
  const double at_center = 0.5 * (s.P * s.x_center + s.q).squaredNorm();
  // Feasible: the unconstrained minimizer satisfies the constraint with slack.
  // Otherwise the constraint binds at a quarter of its value there.
  s.kappa = feasible ? at_center + 1.0 : 0.25 * at_center;
  s.noise_sigma = noise_sigma;
  return make_constraint_penalty(s);
}

ProblemPtr make_wcwc_toy(const WcwcToySpec& spec) {
  auto problem = std::make_shared<WcwcToy>(spec);
  Rng probe = make_rng(0, Stream::Probe);
  const double residual = mvi_residual(*problem, *problem->true_saddle(), 10000, probe);
  if (residual < -1e-9) {
    throw ConstructionError("wcwc_toy: Minty condition fails at w* (residual " + format_real(residual) + ")");
  }
  return problem;
}

ProblemPtr make_wcwc_toy(int d, Rng& rng, double noise_sigma, double perturbation) {
  if (d < 1) throw ParameterError("make_wcwc_toy: d must be positive");
  WcwcToySpec s;
  s.K = gaussian(d, d, rng) / std::sqrt(double(d));
  s.D.resize(2 * d);
  for (Eigen::Index i = 0; i < 2 * d; ++i) s.D(i) = rng.uniform(0.6, 1.2);
  s.perturbation = perturbation;
  s.radius = 0.95 * M_PI / s.D.maxCoeff();
  s.noise_sigma = noise_sigma;
  return make_wcwc_toy(s);
}

// ---- registry ------------------------------------------------------------------------

const std::vector<ProblemEntry>& problem_registry() {
  static const std::vector<ProblemEntry> registry = [] {
    std::vector<ProblemEntry> r;
    r.push_back({"quad_primal", "strongly-convex-strongly-concave quadratic, composition on x",
                 {{"seed", 1}, {"d_x", 4}, {"d_y", 3}, {"noise_sigma", 0.5}},
                 [](const ProblemParams& p) {
                   return quad_entry(p, CompositionMode::OnPrimal, QuadRegime::ScSc, "quad_primal");
                 }});
    r.push_back({"quad_ncsc", "nonconvex-strongly-concave quadratic, composition on x",
                 {{"seed", 1}, {"d_x", 4}, {"d_y", 4}, {"noise_sigma", 0.5}},
                 [](const ProblemParams& p) {
                   return quad_entry(p, CompositionMode::OnPrimal, QuadRegime::NcSc, "quad_ncsc");
                 }});
    r.push_back({"quad_dual", "strongly-convex-strongly-concave quadratic, composition on y",
                 {{"seed", 1}, {"d_x", 3}, {"d_y", 4}, {"noise_sigma", 0.5}},
                 [](const ProblemParams& p) {
                   return quad_entry(p, CompositionMode::OnDual, QuadRegime::ScSc, "quad_dual");
                 }});
    r.push_back({"quad_both", "strongly-convex-strongly-concave quadratic, composition on (x, y)",
                 {{"seed", 1}, {"d_x", 3}, {"d_y", 3}, {"noise_sigma", 0.5}},
                 [](const ProblemParams& p) {
                   return quad_entry(p, CompositionMode::OnBoth, QuadRegime::ScSc, "quad_both");
                 }});
    r.push_back({"auc_toy", "AUC margin minimax on two Gaussian classes, composed adaptation step",
                 {{"seed", 1}, {"n", 400}, {"d", 2}, {"imratio", 0.1}, {"alpha_inner", 0.1},
                  {"theta_bound", 10}},
                 [](const ProblemParams& p) {
                   Rng rng = data_rng(p);
                   AucToySpec s;
                   s.n = int_param(p, "n", 2);
                   s.d = int_param(p, "d", 1);
                   s.imratio = p.at("imratio");
                   s.alpha_inner = p.at("alpha_inner");
                   s.theta_bound = p.at("theta_bound");
                   return make_auc_toy(s, rng);
                 }});
    r.push_back({"robust_weights", "worst-case task weights over one-step adapted quadratic losses",
                 {{"seed", 1}, {"n_tasks", 4}, {"d", 3}, {"noise_sigma", 0.1}, {"first_order", 0}},
                 [](const ProblemParams& p) {
                   Rng rng = data_rng(p);
                   return make_robust_weights(int_param(p, "n_tasks", 2), int_param(p, "d", 1), rng,
                                              p.at("noise_sigma"), flag_param(p, "first_order"));
                 }});
    r.push_back({"mixture_weights", "source mixture weights against a loss-difference adversary",
                 {{"seed", 1}, {"n_sources", 4}, {"d", 3}, {"noise_sigma", 0.1}},
                 [](const ProblemParams& p) {
                   Rng rng = data_rng(p);
                   return make_mixture_weights(int_param(p, "n_sources", 2), int_param(p, "d", 1), rng,
                                               p.at("noise_sigma"));
                 }});
    r.push_back({"constraint_penalty", "quadratic objective with a compositional constraint multiplier",
                 {{"seed", 1}, {"d", 4}, {"noise_sigma", 0.1}, {"feasible", 0}},
                 [](const ProblemParams& p) {
                   Rng rng = data_rng(p);
                   return make_constraint_penalty(int_param(p, "d", 1), rng, p.at("noise_sigma"),
                                                  flag_param(p, "feasible"));
                 }});
    r.push_back({"wcwc_toy", "weakly-convex-weakly-concave toy satisfying the Minty condition at 0",
                 {{"seed", 1}, {"d", 2}, {"noise_sigma", 0.1}, {"perturbation", 0.5}},
                 [](const ProblemParams& p) {
                   Rng rng = data_rng(p);
                   return make_wcwc_toy(int_param(p, "d", 1), rng, p.at("noise_sigma"),
                                        p.at("perturbation"));
                 }});
    return r;
  }();
  return registry;
}

const ProblemEntry& find_problem(const std::string& name) {
  for (const auto& e : problem_registry()) {
    if (e.name == name) return e;
  }
  throw ParameterError("unknown problem '" + name + "'");
}

ProblemPtr build_problem(const std::string& name, const ProblemParams& params) {
  const ProblemEntry& entry = find_problem(name);
  ProblemParams merged = entry.defaults;
  for (const auto& [key, value] : params) {
    if (!entry.defaults.count(key)) {
      throw ParameterError("problem '" + name + "' has no parameter '" + key + "'");
    }
    if (!std::isfinite(value)) throw ParameterError("problem." + key + " must be finite");
    merged[key] = value;
  }
  return entry.make(merged);
}

// ---- fixtures ------------------------------------------------------------------------

namespace {

constexpr const char* kFixtureMagic = "coda-fixture";
constexpr const char* kFixtureVersion = "v1";

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::string field(const std::string& token, const std::string& key) {
  const std::string prefix = key + "=";
  if (token.rfind(prefix, 0) != 0) throw DataError("fixture header: expected '" + key + "='");
  return token.substr(prefix.size());
}

}  // namespace

void write_fixture(std::ostream& os, const std::string& name, const Matrix& m) {
  if (name.empty() || name.find_first_of(" \t\n=") != std::string::npos) {
    throw ParameterError("write_fixture: name must be a nonempty word without '='");
  }
  std::string body;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) body += ' ';
      body += format_real(m(i, j));
    }
    body += '\n';
  }
  os << kFixtureMagic << ' ' << kFixtureVersion << " name=" << name << " rows=" << m.rows()
     << " cols=" << m.cols() << " checksum=" << hex64(fnv1a64(body)) << '\n'
     << body;
  if (!os) throw DataError("write_fixture: stream write failed");
}

NamedMatrix read_fixture(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw DataError("read_fixture: missing header");
  std::istringstream hs(header);
  std::string magic, version, name_tok, rows_tok, cols_tok, sum_tok, extra;
  hs >> magic >> version >> name_tok >> rows_tok >> cols_tok >> sum_tok;
  if (magic != kFixtureMagic) throw DataError("read_fixture: not a fixture header");
  if (version != kFixtureVersion) throw DataError("read_fixture: unsupported version '" + version + "'");
  if (hs >> extra) throw DataError("read_fixture: trailing header fields");
  NamedMatrix out;
  out.name = field(name_tok, "name");
  const auto rows = parse_int(field(rows_tok, "rows"));
  const auto cols = parse_int(field(cols_tok, "cols"));
  const std::string expected = field(sum_tok, "checksum");
  if (rows < 0 || cols < 0) throw DataError("read_fixture: negative dimensions");
  out.value.resize(rows, cols);
  std::string body;
  for (std::int64_t i = 0; i < rows; ++i) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("read_fixture: '" + out.name + "' is truncated");
    body += line;
    body += '\n';
    std::istringstream ls(line);
    std::string tok;
    std::int64_t j = 0;
    while (ls >> tok) {
      if (j >= cols) throw DataError("read_fixture: '" + out.name + "' has too many columns");
      out.value(i, j++) = parse_real(tok);
    }
    if (j != cols) throw DataError("read_fixture: '" + out.name + "' has too few columns");
  }
  if (hex64(fnv1a64(body)) != expected) {
    throw DataError("read_fixture: checksum mismatch in '" + out.name + "'");
  }
  return out;
}

std::vector<NamedMatrix> read_fixtures(std::istream& is) {
  std::vector<NamedMatrix> out;
  while (true) {
    while (is.peek() == '\n') is.get();
    if (is.peek() == std::char_traits<char>::eof()) break;
    out.push_back(read_fixture(is));
  }
  return out;
}

}  // namespace coda
