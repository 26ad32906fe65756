#include "coda/types.hpp"

#include <cmath>
#include <string>

#include "coda/errors.hpp"

namespace coda {

Vector PrimalDualPoint::stacked() const {
  Vector w(x.size() + y.size());
  w << x, y;
  return w;
}

PrimalDualPoint PrimalDualPoint::split(const Vector& w, Eigen::Index d_x) {
  if (d_x < 0 || d_x > w.size()) {
    throw ShapeError("split: primal dimension " + std::to_string(d_x) + " exceeds stacked size " +
                     std::to_string(w.size()));
  }
  return {w.head(d_x), w.tail(w.size() - d_x)};
}

bool all_finite(const Vector& v) { return v.allFinite(); }

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Vector& v, std::string_view where) {
  if (!v.allFinite()) {
    throw NumericError(std::string(where) + ": non-finite entry");
  }
}

void require_finite(double value, std::string_view where) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(where) + ": non-finite value");
  }
}

void require_dim(const Vector& v, Eigen::Index expected, std::string_view where) {
  if (v.size() != expected) {
    throw ShapeError(std::string(where) + ": expected dimension " + std::to_string(expected) +
                     ", got " + std::to_string(v.size()));
  }
}

}  // namespace coda
