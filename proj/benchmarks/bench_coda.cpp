#include <benchmark/benchmark.h>

#include "coda/algorithms.hpp"
#include "coda/geometry.hpp"
#include "coda/problems.hpp"
#include "coda/tracking.hpp"

using namespace coda;

namespace {

ProblemPtr quad(int d) {
  const double dd = d;
  return build_problem("quad_primal", {{"d_x", dd}, {"d_y", dd}});
}

void BM_TrackerStep(benchmark::State& state) {
  const auto p = quad(static_cast<int>(state.range(0)));
  Rng rng = make_rng(0, Stream::TrackerBatch);
  const Vector x = Vector::Ones(p->meta().d_x);
  TrackerState st = tracker_init(*p, x, 16, 0.5, rng);
  for (auto _ : state) {
    st = tracker_step(st, *p, x, 16, rng);
    benchmark::DoNotOptimize(st.z.data());
  }
}
BENCHMARK(BM_TrackerStep)->Arg(4)->Arg(32)->Arg(128);

void BM_ChainGrad(benchmark::State& state) {
  const auto p = quad(static_cast<int>(state.range(0)));
  Rng rng = make_rng(0, Stream::GradientBatch);
  const Vector x = Vector::Ones(p->meta().d_x), y = Vector::Zero(p->meta().d_y);
  const Vector z = p->inner_mean(x);
  const Batch in = draw_batch(rng, SampleKind::Inner, 16), out = draw_batch(rng, SampleKind::Outer, 16);
  for (auto _ : state) benchmark::DoNotOptimize(chain_grad(*p, x, 1, z, y, in, out));
}
BENCHMARK(BM_ChainGrad)->Arg(4)->Arg(32)->Arg(128);

void BM_SimplexProjection(benchmark::State& state) {
  Rng rng = make_rng(0, Stream::Probe);
  Vector v(state.range(0));
  for (auto& c : v) c = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(project_simplex(v));
}
BENCHMARK(BM_SimplexProjection)->Arg(8)->Arg(256)->Arg(4096);

void BM_CodaPrimalRun(benchmark::State& state) {
  const auto p = quad(8);
  AlgoConfig cfg;
  cfg.T = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(coda_primal(*p, cfg).final.x.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CodaPrimalRun)->Arg(1000);

void BM_CodaPrimalPlusRun(benchmark::State& state) {
  const auto p = quad(8);
  AlgoConfig cfg;
  cfg.T = 20;
  cfg.K = static_cast<int>(state.range(0)) / 20;
  cfg.mu_x = 2 * p->meta().L;
  for (auto _ : state) benchmark::DoNotOptimize(coda_primal_plus(*p, cfg).final.x.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CodaPrimalPlusRun)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
