#include "coda/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coda/errors.hpp"

namespace coda {

double AlgoConfig::alpha_at(int t) const {
  if (alpha_schedule.empty()) return 0.0;
  const auto i = static_cast<std::size_t>(std::max(t, 0));
  return alpha_schedule[std::min(i, alpha_schedule.size() - 1)];
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError("AlgoConfig: " + what);
}

}  // namespace

void AlgoConfig::validate() const {
  require(std::isfinite(eta_x) && eta_x >= 0.0, "eta_x must be finite and >= 0");
  require(std::isfinite(eta_y) && eta_y >= 0.0, "eta_y must be finite and >= 0");
  require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
  require(batch_M >= 1, "batch_M must be >= 1");
  require(batch_B >= 1, "batch_B must be >= 1");
  require(batch_Btau >= 1, "batch_Btau must be >= 1");
  require(tau >= 1, "tau must be >= 1");
  require(std::all_of(alpha_schedule.begin(), alpha_schedule.end(),
                      [](double a) { return std::isfinite(a) && a >= 0.0; }),
          "alpha_schedule entries must be finite and >= 0");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be > 0");
  require(std::isfinite(mu_x) && mu_x >= 0.0, "mu_x must be >= 0");
  require(T >= 0, "T must be >= 0");
  require(K >= 1, "K must be >= 1");
  require(theta_exponent > 0.0 && theta_exponent < 1.0, "theta_exponent must lie in (0, 1)");
  require(z0_init_samples >= 1, "z0_init_samples must be >= 1");
}

}  // namespace coda
