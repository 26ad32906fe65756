#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace coda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Primal/dual pair. Algorithms keep x and y separate; the stacked w = [x; y]
// is produced on demand for the composition-on-both mode.
struct PrimalDualPoint {
  Vector x;
  Vector y;

  Vector stacked() const;
  static PrimalDualPoint split(const Vector& w, Eigen::Index d_x);
};

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

// Throws NumericError naming `where` when v holds a NaN or Inf.
void require_finite(const Vector& v, std::string_view where);
void require_finite(double value, std::string_view where);

// Throws ShapeError when v.size() != expected.
void require_dim(const Vector& v, Eigen::Index expected, std::string_view where);

}  // namespace coda
