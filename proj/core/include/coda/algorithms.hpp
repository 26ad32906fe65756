#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coda/config.hpp"
#include "coda/measures.hpp"
#include "coda/oracle.hpp"
#include "coda/records.hpp"
#include "coda/tracking.hpp"
#include "coda/wrap.hpp"

namespace coda {

enum class AlgoKind { CodaPrimal, CodaDual, CodaScsc, CodaPd, CodaScscPlus, CodaPrimalPlus, Sgda, Scgda };

const char* to_string(AlgoKind kind);
// ParameterError for an unknown name.
AlgoKind parse_algo(const std::string& name);
const std::vector<AlgoKind>& all_algos();

CompositionMode required_mode(AlgoKind kind);
// ModeError unless the problem's composition mode suits the algorithm.
void check_mode(AlgoKind kind, const Problem& problem);

struct RunOptions {
  std::optional<PrimalDualPoint> start;  // default: problem.default_start()
  MeasurePlan measures;
  bool keep_iterates = false;
  bool timing = false;  // fill wall_nanos
};

// Every run records t = 0, every measures.every steps and the final step. t
// counts inner iterations across outer rounds; samples_used counts oracle
// draws including the z0 initialisation.

RunResult coda_primal(const Problem& problem, const AlgoConfig& config, const RunOptions& options = {});
RunResult coda_dual(const Problem& problem, const AlgoConfig& config, const RunOptions& options = {});
// Outer loop over F_k = F + 1/(2 gamma)(|x - x_k|^2 - |y - y_k|^2); output
// drawn with probability proportional to (k+1)^theta_exponent.
RunResult coda_pd(const Problem& problem, const AlgoConfig& config, const RunOptions& options = {});
// Outer loop over F_k = F + mu_x/2 |x - x_k|^2 with variance-reduced rounds;
// outputs the last outer point.
RunResult coda_primal_plus(const Problem& problem, const AlgoConfig& config,
                           const RunOptions& options = {});
RunResult sgda(const Problem& problem, const AlgoConfig& config, const RunOptions& options = {});
RunResult scgda(const Problem& problem, const AlgoConfig& config, const RunOptions& options = {});

// One proximal round from (x0, y0): T tracked steps on the stacked variable,
// last iterate returned. Tracker initialised from config.seed.
PrimalDualPoint coda_scsc(const Problem& problem_k, const Vector& x0, const Vector& y0, int T,
                          const AlgoConfig& config);
// One variance-reduced round; returns the average of (x^t, y^t), t = 1..T.
PrimalDualPoint coda_scsc_plus(const Problem& problem_k, const Vector& x0, const Vector& y0, int T,
                               const AlgoConfig& config);

// Dispatch by kind. CodaScsc runs one unanchored stacked-variable round on the
// problem itself; CodaScscPlus runs coda_primal_plus with K = 1.
RunResult run_algorithm(AlgoKind kind, const Problem& problem, const AlgoConfig& config,
                        const RunOptions& options = {});

// theta_k / sum theta, theta_k = (k+1)^exponent, k = 0..K-1.
std::vector<double> pd_output_weights(int K, double exponent);
// Index drawn from unnormalised nonnegative weights by inversion.
int sample_index(const std::vector<double>& weights, Rng& rng);

}  // namespace coda
