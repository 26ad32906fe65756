#pragma once

#include <cstdint>
#include <vector>

namespace coda {

// Hyperparameters shared by every algorithm. Fields a given algorithm does not
// use are ignored by it.
struct AlgoConfig {
  double eta_x = 0.01;  // primal stepsize
  double eta_y = 0.01;  // dual stepsize
  double beta = 0.5;    // tracker mixing weight, in (0, 1]
  int batch_M = 16;     // tracker batch
  int batch_B = 16;     // gradient batch
  int batch_Btau = 128; // variance-reduction refresh batch
  int tau = 8;          // variance-reduction epoch length
  // Regularizer schedule of the dual-composition method. Entry t is used at
  // iteration t; the last entry repeats; empty means all zero.
  std::vector<double> alpha_schedule;
  double gamma = 1.0;          // proximal weight of the outer loop, F + 1/(2 gamma)(...)
  double mu_x = 0.0;           // proximal weight of the variance-reduced outer loop
  int T = 100;                 // inner iterations
  int K = 1;                   // outer iterations
  double theta_exponent = 0.5; // output weights theta_k = (k+1)^exponent
  std::uint64_t seed = 0;
  int z0_init_samples = 64;
  // Outer loops carry the tracker across rounds unless this is set.
  bool reinit_tracker_each_round = false;

  double alpha_at(int t) const;

  // Throws ParameterError on an out-of-range field. Stepsizes may be zero here
  // (a frozen run is a valid library call); the config-file parser is stricter.
  void validate() const;
};

}  // namespace coda
