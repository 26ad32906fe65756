#include "coda/rng.hpp"

#include <cmath>
#include <numbers>

namespace coda {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream, 0x636f6461u};
  return std::mt19937_64(seq);
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Box-Muller on (0,1] x [0,1).
void box_muller(double u1, double u2, double& a, double& b) {
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  a = radius * std::cos(angle);
  b = radius * std::sin(angle);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint32_t stream) : engine_(seeded_engine(seed, stream)) {}

double Rng::uniform() { return to_unit(engine_()); }

double Rng::uniform_open_low() { return 1.0 - uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double a = 0.0;
  box_muller(uniform_open_low(), uniform(), a, spare_normal_);
  has_spare_ = true;
  return a;
}

std::uint64_t Rng::index(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

Rng make_rng(std::uint64_t seed, std::uint32_t stream) { return Rng(seed, stream); }

Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(seed, static_cast<std::uint32_t>(stream));
}

std::uint64_t TokenStream::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double TokenStream::uniform() { return to_unit(next_u64()); }

double TokenStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double a = 0.0;
  box_muller(1.0 - uniform(), uniform(), a, spare_normal_);
  has_spare_ = true;
  return a;
}

}  // namespace coda
