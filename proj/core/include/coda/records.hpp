#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "coda/types.hpp"

namespace coda {

// One measured point of a trajectory. Metrics are squared norms; a metric that
// was not computed is absent rather than zero.
struct IterationRecord {
  std::int64_t t = 0;
  std::int64_t samples_used = 0;
  std::optional<double> grad_norm_sq;
  std::optional<double> stationary_gap_sq;
  std::optional<double> moreau_grad_sq;
  std::optional<double> tracking_err_sq;
  std::optional<double> objective;
  std::optional<std::int64_t> wall_nanos;

  bool operator==(const IterationRecord&) const = default;
};

struct RunResult {
  std::vector<IterationRecord> records;
  PrimalDualPoint final;
  std::optional<std::int64_t> sampled_index;
  // Filled only when the caller asked for the iterate path (x^0 .. x^T).
  std::vector<PrimalDualPoint> iterates;
};

// Appends rec, enforcing strictly increasing t and nondecreasing samples_used.
void record_append(RunResult& result, IterationRecord rec);

}  // namespace coda
