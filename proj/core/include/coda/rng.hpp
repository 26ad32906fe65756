#pragma once

#include <cstdint>
#include <random>

namespace coda {

// Purpose-specific streams fanned out from one master seed. Changing how many
// draws one purpose consumes never shifts the draws of another.
enum class Stream : std::uint32_t {
  TrackerInit = 0,
  TrackerBatch = 1,
  GradientBatch = 2,
  Output = 3,
  RefreshBatch = 4,
  Measurement = 5,
  ProblemData = 6,
  Probe = 7,
};

// Deterministic pseudo-random stream. The engine is std::mt19937_64 (fully
// specified by the standard); real-valued draws are derived from raw 64-bit
// words here rather than through <random> distributions, whose algorithms are
// implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint32_t stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_open_low();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n); unbiased.
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

Rng make_rng(std::uint64_t seed, std::uint32_t stream);
Rng make_rng(std::uint64_t seed, Stream stream);

// Cheap counter-based generator that expands one 64-bit sample token into the
// per-sample randomness (noise vectors, data indices) a problem needs.
class TokenStream {
 public:
  explicit TokenStream(std::uint64_t token) : state_(token) {}

  std::uint64_t next_u64();
  double uniform();
  double normal();

 private:
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace coda
