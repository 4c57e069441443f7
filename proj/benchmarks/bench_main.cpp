#include <benchmark/benchmark.h>

#include "uct/learned_solver.hpp"
#include "uct/network.hpp"
#include "uct/phantoms.hpp"
#include "uct/projector.hpp"
#include "uct/tv.hpp"

namespace {

struct Setup {
  uct::ImageGrid grid;
  uct::ForwardModel model;
  uct::SamplePair sample;

  explicit Setup(int n, int angles = 30)
      : grid(uct::ImageGrid::square(n)),
        model(uct::RayTransform(grid, uct::ParallelGeometry::covering(grid, angles))),
        sample(uct::make_sample(uct::shepp_logan(grid), model, uct::NoiseSpec::gaussian(0.05, 7))) {}
};

uct::NetParams random_theta(const uct::SolverConfig& cfg) {
  uct::Rng rng(3);
  return uct::init_params(rng, cfg.architecture());
}

void BM_RayForward(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(s.model.ray().apply(s.sample.f_true));
}
BENCHMARK(BM_RayForward)->Arg(64)->Arg(128);

void BM_RayAdjoint(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(s.model.ray().adjoint(s.sample.g));
}
BENCHMARK(BM_RayAdjoint)->Arg(64)->Arg(128);

void BM_Fbp(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uct::fbp(s.model.ray(), s.sample.g));
}
BENCHMARK(BM_Fbp)->Arg(64)->Arg(128);

void BM_Conv2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  uct::FeatureMap x(32, n, n, 0.5);
  std::vector<double> w(32 * 32 * 9, 0.01);
  std::vector<double> b(32, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(uct::conv2d(x, w, b));
}
BENCHMARK(BM_Conv2d)->Arg(64);

void BM_Conv2dVjp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  uct::FeatureMap x(32, n, n, 0.5);
  uct::FeatureMap dy(32, n, n, 0.1);
  std::vector<double> w(32 * 32 * 9, 0.01);
  std::vector<double> dw(w.size());
  std::vector<double> db(32);
  uct::FeatureMap dx;
  for (auto _ : state) {
    uct::conv2d_vjp(x, w, dy, &dx, dw, db);
    benchmark::DoNotOptimize(dx.data.data());
  }
}
BENCHMARK(BM_Conv2dVjp)->Arg(64);

void BM_Reconstruct(benchmark::State& state) {
  Setup s(64);
  uct::SolverConfig cfg;
  cfg.mode = static_cast<uct::GradientMode>(state.range(0));
  cfg.precision = static_cast<uct::Precision>(state.range(1));
  const uct::NetParams theta = random_theta(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(uct::reconstruct(s.model, s.sample.g, theta, cfg));
}
BENCHMARK(BM_Reconstruct)->ArgsProduct({{0, 1, 2}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_LossGradient(benchmark::State& state) {
  Setup s(64);
  uct::SolverConfig cfg;
  cfg.precision = static_cast<uct::Precision>(state.range(0));
  const uct::NetParams theta = random_theta(cfg);
  const std::vector<uct::SamplePair> batch{s.sample};
  for (auto _ : state) benchmark::DoNotOptimize(uct::loss_gradient(s.model, theta, batch, cfg));
}
BENCHMARK(BM_LossGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TvIteration(benchmark::State& state) {
  Setup s(64);
  uct::CpConfig cfg;
  cfg.iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(uct::chambolle_pock_tv(s.model, s.sample.g, 0.05, cfg));
}
BENCHMARK(BM_TvIteration)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
