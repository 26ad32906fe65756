#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coda/algorithms.hpp"
#include "coda/errors.hpp"
#include "coda/problems.hpp"

namespace coda {

// Config-file error; line is 1-based, 0 when the error is not tied to a line.
class ConfigError : public ParameterError {
 public:
  ConfigError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  AlgoKind algo = AlgoKind::CodaPrimal;
  std::string problem;
  ProblemParams problem_params;
  std::string preset;  // empty, or one of preset_names()
  AlgoConfig algo_config;
  std::vector<std::uint64_t> seeds{0};
  MeasurePlan measures;
  std::string out_path;
  bool timing = false;
};

const std::vector<std::string>& preset_names();

// Stepsize-and-weight prescriptions per curvature regime, scaled by `scale`
// (the hidden constant of each Theta). `epsilon` is the target accuracy used by
// the convex-nonconcave preset. ParameterError when the problem lacks what the
// preset needs (a curvature modulus, a bounded domain).
void apply_preset(const std::string& preset, const ProblemMeta& meta, double scale, double epsilon,
                  AlgoConfig& config);

// Flat `key = value` lines, `#` comments. Required: algo, problem. Problem
// parameters are `problem.<name> = value`. Keys given explicitly override the
// preset whatever their order. Stepsizes must be positive here.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<RunResult> result;
  std::string error;  // set when the run failed
  int error_kind = 0; // exit-code class of the failure: 1 validation, 2 runtime
};

// One result per seed in seed order. Seeds run on up to `threads` workers;
// a failing seed records its error and does not stop the others.
std::vector<SeedResult> run_experiment(const ExperimentConfig& config, int threads = 1);

inline constexpr const char* kCsvHeader =
    "seed,t,samples_used,objective,grad_norm_sq,stationary_gap_sq,moreau_grad_sq,tracking_err_sq,"
    "wall_nanos";

// Rows sorted by (seed, t); absent metrics are empty fields.
void write_csv(const std::vector<SeedResult>& results, std::ostream& os);
// DataError naming the path when the file cannot be written.
void emit_csv(const std::vector<SeedResult>& results, const std::string& path);

struct CsvRow {
  std::uint64_t seed = 0;
  IterationRecord record;
};
std::vector<CsvRow> read_csv(std::istream& is);

struct SummaryRow {
  std::string metric;
  int n_seeds = 0;
  double median = 0.0;
  double iqr = 0.0;
};

// Per seed, the mean of each metric over the records with t in the final tenth
// of the run; then median and interquartile range across seeds.
std::vector<SummaryRow> emit_summary(const std::vector<SeedResult>& results);
std::string format_summary(const std::vector<SummaryRow>& rows);

using Metric = std::optional<double> IterationRecord::*;

// Mean of a metric over the records with t_lo <= t <= t_hi that carry it.
// NaN when there are none.
double window_mean(const std::vector<IterationRecord>& records, Metric metric, std::int64_t t_lo,
                   std::int64_t t_hi);
// The window of the final tenth: t >= 0.9 t_last, at least the last record.
double final_window_mean(const std::vector<IterationRecord>& records, Metric metric);

// Linear-interpolation quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace coda
