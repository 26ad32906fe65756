#include "coda/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coda/errors.hpp"

namespace coda {

const char* to_string(CompositionMode mode) {
  switch (mode) {
    case CompositionMode::OnPrimal:
      return "OnPrimal";
    case CompositionMode::OnDual:
      return "OnDual";
    case CompositionMode::OnBoth:
      return "OnBoth";
    case CompositionMode::None:
      return "None";
  }
  return "?";
}

Eigen::Index ProblemMeta::inner_input_dim() const {
  switch (mode) {
    case CompositionMode::OnPrimal:
      return d_x;
    case CompositionMode::OnDual:
      return d_y;
    case CompositionMode::OnBoth:
      return d_x + d_y;
    case CompositionMode::None:
      return 0;
  }
  return 0;
}

Batch draw_batch(Rng& rng, SampleKind kind, int size) {
  Batch batch(static_cast<std::size_t>(std::max(size, 0)));
  for (auto& s : batch) s = OracleSample{kind, rng.next_u64()};
  return batch;
}

// ---- Problem defaults -------------------------------------------------------

Vector Problem::inner_vjp(const Vector& input, std::uint64_t draw, const Vector& v) const {
  return inner_jacobian(input, draw).transpose() * v;
}

Vector Problem::inner_mean(const Vector&) const {
  throw CapabilityError(name() + ": no closed-form inner expectation");
}

Matrix Problem::inner_mean_jacobian(const Vector&) const {
  throw CapabilityError(name() + ": no closed-form inner expectation");
}

double Problem::outer_mean_value(const Vector&, const Vector&) const {
  throw CapabilityError(name() + ": no closed-form outer expectation");
}

Vector Problem::outer_mean_grad1(const Vector&, const Vector&) const {
  throw CapabilityError(name() + ": no closed-form outer expectation");
}

Vector Problem::outer_mean_grad2(const Vector&, const Vector&) const {
  throw CapabilityError(name() + ": no closed-form outer expectation");
}

double Problem::h_value(const Vector&) const { return 0.0; }

Vector Problem::h_grad(const Vector& x) const { return Vector::Zero(x.size()); }

double Problem::r_value(const Vector&) const { return 0.0; }

Vector Problem::r_grad(const Vector& y) const { return Vector::Zero(y.size()); }

Vector Problem::r_implicit_step(const Vector& v, double eta) const {
  return v - eta * r_grad(v);
}

PrimalDualPoint Problem::default_start() const {
  const auto& m = meta();
  return {domain_x().project(Vector::Zero(m.d_x)), domain_y().project(Vector::Zero(m.d_y))};
}

// ---- minibatch oracles --------------------------------------------------------

namespace {

// Validates the batch. A noiseless problem's samples are all alike, so one
// stands for the batch; the mean is then batch-independent bit for bit.
std::span<const OracleSample> sample_batch(const Problem& problem, std::span<const OracleSample> batch,
                                           SampleKind kind, const char* where) {
  if (batch.empty()) throw ParameterError(std::string(where) + ": empty batch");
  for (const auto& s : batch) {
    if (s.kind != kind) {
      throw ParameterError(std::string(where) + ": sample of the wrong kind");
    }
  }
  return problem.meta().sigma == 0.0 ? batch.first(1) : batch;
}

void require_inner_input(const Problem& problem, const Vector& input, const char* where) {
  const auto& m = problem.meta();
  if (m.mode == CompositionMode::None) {
    throw ModeError(std::string(where) + ": problem has no inner map");
  }
  require_dim(input, m.inner_input_dim(), where);
}

bool single_arg_outer(const Problem& problem) {
  return problem.meta().mode == CompositionMode::OnBoth;
}

}  // namespace

Vector g_value(const Problem& problem, const Vector& input, std::span<const OracleSample> batch) {
  require_inner_input(problem, input, "g_value");
  batch = sample_batch(problem, batch, SampleKind::Inner, "g_value");
  Vector sum = Vector::Zero(problem.meta().d_z);
  for (const auto& s : batch) sum += problem.inner(input, s.draw);
  sum /= static_cast<double>(batch.size());
  require_finite(sum, "g_value");
  return sum;
}

Matrix g_jacobian(const Problem& problem, const Vector& input,
                  std::span<const OracleSample> batch) {
  require_inner_input(problem, input, "g_jacobian");
  batch = sample_batch(problem, batch, SampleKind::Inner, "g_jacobian");
  Matrix sum = Matrix::Zero(problem.meta().d_z, input.size());
  for (const auto& s : batch) sum += problem.inner_jacobian(input, s.draw);
  sum /= static_cast<double>(batch.size());
  if (!sum.allFinite()) throw NumericError("g_jacobian: non-finite entry");
  return sum;
}

double f_value(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch) {
  batch = sample_batch(problem, batch, SampleKind::Outer, "f_value");
  double sum = 0.0;
  for (const auto& s : batch) sum += problem.outer_value(a, b, s.draw);
  sum /= static_cast<double>(batch.size());
  require_finite(sum, "f_value");
  return sum;
}

Vector f_grad1(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch) {
  batch = sample_batch(problem, batch, SampleKind::Outer, "f_grad1");
  Vector sum = Vector::Zero(a.size());
  for (const auto& s : batch) sum += problem.outer_grad1(a, b, s.draw);
  sum /= static_cast<double>(batch.size());
  require_finite(sum, "f_grad1");
  return sum;
}

Vector f_grad2(const Problem& problem, const Vector& a, const Vector& b,
               std::span<const OracleSample> batch) {
  if (single_arg_outer(problem)) {
    throw ModeError("f_grad2: outer map takes a single argument under OnBoth");
  }
  batch = sample_batch(problem, batch, SampleKind::Outer, "f_grad2");
  Vector sum = Vector::Zero(b.size());
  for (const auto& s : batch) sum += problem.outer_grad2(a, b, s.draw);
  sum /= static_cast<double>(batch.size());
  require_finite(sum, "f_grad2");
  return sum;
}

Vector chain_grad(const Problem& problem, const Vector& input, int slot, const Vector& a,
                  const Vector& b, std::span<const OracleSample> inner_batch,
                  std::span<const OracleSample> outer_batch) {
  require_inner_input(problem, input, "chain_grad");
  if (inner_batch.size() != outer_batch.size()) {
    throw ShapeError("chain_grad: inner and outer batches must pair up");
  }
  inner_batch = sample_batch(problem, inner_batch, SampleKind::Inner, "chain_grad");
  outer_batch = sample_batch(problem, outer_batch, SampleKind::Outer, "chain_grad");
  if (slot == 2 && single_arg_outer(problem)) {
    throw ModeError("chain_grad: outer map takes a single argument under OnBoth");
  }
  Vector sum = Vector::Zero(input.size());
  for (std::size_t i = 0; i < inner_batch.size(); ++i) {
    const Vector outer = slot == 1 ? problem.outer_grad1(a, b, outer_batch[i].draw)
                                   : problem.outer_grad2(a, b, outer_batch[i].draw);
    sum += problem.inner_vjp(input, inner_batch[i].draw, outer);
  }
  sum /= static_cast<double>(inner_batch.size());
  require_finite(sum, "chain_grad");
  return sum;
}

Vector h_grad(const Problem& problem, const Vector& x) {
  require_dim(x, problem.meta().d_x, "h_grad");
  Vector g = problem.h_grad(x);
  require_finite(g, "h_grad");
  return g;
}

Vector r_grad(const Problem& problem, const Vector& y) {
  require_dim(y, problem.meta().d_y, "r_grad");
  Vector g = problem.r_grad(y);
  require_finite(g, "r_grad");
  return g;
}

// ---- expectation objective --------------------------------------------------------

namespace {

constexpr std::uint64_t kMeasurementSeed = 0x6d65617375726573ull;

// Expected inner value/Jacobian and expected outer derivatives, either closed
// form or a fixed-stream Monte Carlo average.
class Expectation {
 public:
  Expectation(const Problem& problem, int mc_samples) : p_(problem), mc_(mc_samples) {
    closed_ = problem.meta().has_closed_form_g;
    if (!closed_ && mc_samples <= 0) {
      throw CapabilityError(problem.name() +
                            ": no closed-form expectation and Monte Carlo budget is zero");
    }
    if (!closed_) {
      Rng inner_rng = make_rng(kMeasurementSeed, Stream::Measurement);
      Rng outer_rng = make_rng(kMeasurementSeed + 1, Stream::Measurement);
      inner_ = draw_batch(inner_rng, SampleKind::Inner, mc_);
      outer_ = draw_batch(outer_rng, SampleKind::Outer, mc_);
    }
  }

  Vector g(const Vector& input) const {
    return closed_ ? p_.inner_mean(input) : g_value(p_, input, inner_);
  }
  Matrix jac(const Vector& input) const {
    return closed_ ? p_.inner_mean_jacobian(input) : g_jacobian(p_, input, inner_);
  }
  double f(const Vector& a, const Vector& b) const {
    return closed_ ? p_.outer_mean_value(a, b) : f_value(p_, a, b, outer_);
  }
  Vector f1(const Vector& a, const Vector& b) const {
    return closed_ ? p_.outer_mean_grad1(a, b) : f_grad1(p_, a, b, outer_);
  }
  Vector f2(const Vector& a, const Vector& b) const {
    if (closed_) return p_.outer_mean_grad2(a, b);
    Vector sum = Vector::Zero(b.size());
    for (const auto& s : outer_) sum += p_.outer_grad2(a, b, s.draw);
    return sum / static_cast<double>(outer_.size());
  }

 private:
  const Problem& p_;
  int mc_;
  bool closed_ = false;
  Batch inner_;
  Batch outer_;
};

void require_point(const Problem& problem, const PrimalDualPoint& point, const char* where) {
  require_dim(point.x, problem.meta().d_x, where);
  require_dim(point.y, problem.meta().d_y, where);
}

}  // namespace

Vector inner_expectation(const Problem& problem, const Vector& input, int mc_samples) {
  require_inner_input(problem, input, "inner_expectation");
  return Expectation(problem, mc_samples).g(input);
}

FullGradient full_gradient(const Problem& problem, const PrimalDualPoint& point, int mc_samples) {
  require_point(problem, point, "full_gradient");
  const auto& m = problem.meta();
  const Vector& x = point.x;
  const Vector& y = point.y;
  FullGradient out;
  switch (m.mode) {
    case CompositionMode::OnPrimal: {
      const Expectation e(problem, mc_samples);
      const Vector z = e.g(x);
      out.gx = e.jac(x).transpose() * e.f1(z, y) + problem.h_grad(x);
      out.gy = e.f2(z, y) - problem.r_grad(y);
      break;
    }
    case CompositionMode::OnDual: {
      const Expectation e(problem, mc_samples);
      const Vector z = e.g(y);
      out.gx = e.f1(x, z) + problem.h_grad(x);
      out.gy = e.jac(y).transpose() * e.f2(x, z) - problem.r_grad(y);
      break;
    }
    case CompositionMode::OnBoth: {
      const Expectation e(problem, mc_samples);
      const Vector w = point.stacked();
      const Vector z = e.g(w);
      const Vector full = e.jac(w).transpose() * e.f1(z, Vector());
      out.gx = full.head(m.d_x) + problem.h_grad(x);
      out.gy = full.tail(m.d_y) - problem.r_grad(y);
      break;
    }
    case CompositionMode::None: {
      if (!m.has_closed_form_g && mc_samples <= 0) {
        throw CapabilityError(problem.name() + ": Monte Carlo budget is zero");
      }
      const Expectation e(problem, mc_samples);
      out.gx = e.f1(x, y) + problem.h_grad(x);
      out.gy = e.f2(x, y) - problem.r_grad(y);
      break;
    }
  }
  require_finite(out.gx, "full_gradient");
  require_finite(out.gy, "full_gradient");
  return out;
}

double objective_value(const Problem& problem, const PrimalDualPoint& point, int mc_samples) {
  require_point(problem, point, "objective_value");
  const auto& m = problem.meta();
  const Expectation e(problem, mc_samples);
  double f = 0.0;
  switch (m.mode) {
    case CompositionMode::OnPrimal:
      f = e.f(e.g(point.x), point.y);
      break;
    case CompositionMode::OnDual:
      f = e.f(point.x, e.g(point.y));
      break;
    case CompositionMode::OnBoth:
      f = e.f(e.g(point.stacked()), Vector());
      break;
    case CompositionMode::None:
      f = e.f(point.x, point.y);
      break;
  }
  const double value = problem.h_value(point.x) + f - problem.r_value(point.y);
  require_finite(value, "objective_value");
  return value;
}

// ---- finite-difference validation -------------------------------------------------

double fd_step(const Vector& input) {
  const double inf_norm = input.size() > 0 ? input.cwiseAbs().maxCoeff() : 0.0;
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + inf_norm);
}

namespace {

// |a - b| / max(1, |a|, |b|): relative for large entries, absolute near zero.
double mixed_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

template <typename Fn>
Vector fd_gradient(const Vector& at, Fn&& scalar) {
  const double h = fd_step(at);
  Vector grad(at.size());
  Vector probe = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + h;
    const double up = scalar(probe);
    probe[i] = at[i] - h;
    const double down = scalar(probe);
    probe[i] = at[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

template <typename Fn>
Matrix fd_jacobian(const Vector& at, Eigen::Index rows, Fn&& map) {
  const double h = fd_step(at);
  Matrix jac(rows, at.size());
  Vector probe = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + h;
    const Vector up = map(probe);
    probe[i] = at[i] - h;
    const Vector down = map(probe);
    probe[i] = at[i];
    jac.col(i) = (up - down) / (2.0 * h);
  }
  return jac;
}

void accumulate(DerivativeCheck& check, const Matrix& analytic, const Matrix& numeric) {
  for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
      const double err = mixed_error(analytic(r, c), numeric(r, c));
      if (err > check.max_rel_error || check.worst_row < 0) {
        check.max_rel_error = err;
        check.worst_row = r;
        check.worst_col = c;
      }
    }
  }
}

Vector mode_input(const ProblemMeta& m, const PrimalDualPoint& p) {
  switch (m.mode) {
    case CompositionMode::OnPrimal:
      return p.x;
    case CompositionMode::OnDual:
      return p.y;
    case CompositionMode::OnBoth:
      return p.stacked();
    case CompositionMode::None:
      return Vector();
  }
  return Vector();
}

}  // namespace

std::string GradientReport::to_string() const {
  std::ostringstream os;
  os << problem << ": " << (passed ? "PASS" : "FAIL") << " (" << n_points
     << " points, tol=" << tol << ")\n";
  for (const auto& c : checks) {
    os << "  " << c.derivative << "  max_rel_err=" << c.max_rel_error;
    if (c.worst_row >= 0 && c.worst_col >= 0) os << "  at(" << c.worst_row << "," << c.worst_col << ")";
    os << (c.passed ? "" : "  <-- FAIL") << "\n";
  }
  return os.str();
}

GradientReport check_gradients(const Problem& problem, int n_points, double tol,
                               std::uint64_t seed) {
  if (n_points < 1) throw ParameterError("check_gradients: n_points must be >= 1");
  if (!(tol > 0.0)) throw ParameterError("check_gradients: tol must be > 0");
  const auto& m = problem.meta();
  GradientReport report{problem.name(), n_points, tol, {}, true};

  DerivativeCheck jac{"g_jacobian"}, vjp{"inner_vjp"}, mean_jac{"inner_mean_jacobian"};
  DerivativeCheck f1{"f_grad1"}, f2{"f_grad2"}, hg{"h_grad"}, rg{"r_grad"};
  DerivativeCheck fgx{"full_gradient_x"}, fgy{"full_gradient_y"};
  const bool composed = m.mode != CompositionMode::None;
  const bool two_arg = m.mode != CompositionMode::OnBoth;

  Rng rng = make_rng(seed, Stream::Probe);
  for (int k = 0; k < n_points; ++k) {
    PrimalDualPoint p{problem.domain_x().sample(rng, m.d_x), problem.domain_y().sample(rng, m.d_y)};
    const std::uint64_t inner_draw = rng.next_u64();
    const std::uint64_t outer_draw = rng.next_u64();

    Vector a, b;
    if (composed) {
      const Vector input = mode_input(m, p);
      accumulate(jac, problem.inner_jacobian(input, inner_draw),
                 fd_jacobian(input, m.d_z, [&](const Vector& v) { return problem.inner(v, inner_draw); }));
      Vector probe_dir(m.d_z);
      for (Eigen::Index i = 0; i < m.d_z; ++i) probe_dir[i] = rng.normal();
      const Matrix jv = problem.inner_vjp(input, inner_draw, probe_dir);
      const Matrix jv_ref = problem.inner_jacobian(input, inner_draw).transpose() * probe_dir;
      accumulate(vjp, jv, jv_ref);
      if (m.has_closed_form_g) {
        accumulate(mean_jac, problem.inner_mean_jacobian(input),
                   fd_jacobian(input, m.d_z, [&](const Vector& v) { return problem.inner_mean(v); }));
      }
      const Vector z = problem.inner(input, inner_draw);
      switch (m.mode) {
        case CompositionMode::OnPrimal:
          a = z;
          b = p.y;
          break;
        case CompositionMode::OnDual:
          a = p.x;
          b = z;
          break;
        default:
          a = z;
          b = Vector();
          break;
      }
    } else {
      a = p.x;
      b = p.y;
    }

    accumulate(f1, problem.outer_grad1(a, b, outer_draw),
               fd_gradient(a, [&](const Vector& v) { return problem.outer_value(v, b, outer_draw); }));
    if (two_arg) {
      accumulate(f2, problem.outer_grad2(a, b, outer_draw),
                 fd_gradient(b, [&](const Vector& v) { return problem.outer_value(a, v, outer_draw); }));
    }
    accumulate(hg, problem.h_grad(p.x),
               fd_gradient(p.x, [&](const Vector& v) { return problem.h_value(v); }));
    accumulate(rg, problem.r_grad(p.y),
               fd_gradient(p.y, [&](const Vector& v) { return problem.r_value(v); }));

    const FullGradient fg = full_gradient(problem, p);
    accumulate(fgx, fg.gx, fd_gradient(p.x, [&](const Vector& v) {
                 return objective_value(problem, {v, p.y});
               }));
    accumulate(fgy, fg.gy, fd_gradient(p.y, [&](const Vector& v) {
                 return objective_value(problem, {p.x, v});
               }));
  }

  auto push = [&](DerivativeCheck c) {
    c.passed = c.max_rel_error <= tol;
    report.passed = report.passed && c.passed;
    report.checks.push_back(std::move(c));
  };
  if (composed) {
    push(std::move(jac));
    push(std::move(vjp));
    if (m.has_closed_form_g) push(std::move(mean_jac));
  }
  push(std::move(f1));
  if (two_arg) push(std::move(f2));
  push(std::move(hg));
  push(std::move(rg));
  push(std::move(fgx));
  push(std::move(fgy));
  return report;
}

}  // namespace coda
