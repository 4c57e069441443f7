#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "support.hpp"
#include "uct/checkpoint.hpp"
#include "uct/errors.hpp"
#include "uct/learned_solver.hpp"

using namespace uct;
namespace fs = std::filesystem;

namespace {

struct Tiny {
  ImageGrid grid = ImageGrid::square(12);
  ParallelGeometry geom = ParallelGeometry::covering(grid, 6);
  ForwardModel linear{RayTransform(grid, geom)};
  ForwardModel beer_lambert{RayTransform(grid, geom), ForwardKind::beer_lambert, BeerLambertParams{1.0e4, 0.02}};
};

SolverConfig small_config(GradientMode mode, const ForwardModel& model) {
  SolverConfig cfg;
  cfg.iterations = 2;
  cfg.memory = 1;
  cfg.mode = mode;
  const GradientScales s = normalized_gradient_scales(model);
  cfg.data_scale = s.data;
  cfg.reg_scale = s.reg;
  return cfg;
}

NetParams random_theta(const NetArchitecture& arch, Rng& rng, double amp) {
  NetParams theta = NetParams::zeros(arch);
  for (double& v : theta.values) v = rng.uniform(-amp, amp);
  return theta;
}

std::vector<SamplePair> make_batch(const ForwardModel& model, std::uint64_t seed, int n) {
  const NoiseSpec noise = model.kind() == ForwardKind::linear ? NoiseSpec::gaussian(0.05) : NoiseSpec::poisson();
  return SampleStream(seed, model, noise).batch(0, n);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uct_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("zero parameters and zero iterations return the FBP initial guess") {
  Tiny t;
  const auto batch = make_batch(t.linear, 1, 1);
  const Image fbp_image = fbp(t.linear.ray(), batch[0].g, RampFilterSpec::ramp());
  for (GradientMode mode : {GradientMode::both, GradientMode::data_only, GradientMode::none}) {
    SolverConfig cfg = small_config(mode, t.linear);
    const NetParams zero = NetParams::zeros(cfg.architecture(4));
    CHECK(reconstruct(t.linear, batch[0].g, zero, cfg).values == fbp_image.values);
    cfg.iterations = 0;
    Rng rng(71);
    CHECK(reconstruct(t.linear, batch[0].g, random_theta(cfg.architecture(4), rng, 0.3), cfg).values ==
          fbp_image.values);
  }
  SolverConfig cfg = small_config(GradientMode::both, t.linear);
  cfg.init = InitKind::zero;
  CHECK(l2_norm_sq(initial_guess(t.linear, batch[0].g, cfg)) == 0.0);

  std::vector<Image> trace;
  Rng rng(72);
  (void)reconstruct(t.linear, batch[0].g, random_theta(cfg.architecture(4), rng, 0.3), small_config(GradientMode::both, t.linear), &trace);
  CHECK(trace.size() == 3);
  CHECK(trace.front().values == fbp_image.values);
}

TEST_CASE("supervised loss properties") {
  Tiny t;
  const SolverConfig cfg = small_config(GradientMode::both, t.linear);
  auto batch = make_batch(t.linear, 2, 3);
  const NetParams zero = NetParams::zeros(cfg.architecture(4));
  const Image f0 = fbp(t.linear.ray(), batch[0].g, RampFilterSpec::ramp());
  const double expected = l2_norm_sq(linear_combination(1.0, f0, -1.0, batch[0].f_true));
  CHECK(supervised_loss(t.linear, zero, std::span(batch).first(1), cfg) == doctest::Approx(expected).epsilon(1e-14));

  Rng rng(73);
  const NetParams theta = random_theta(cfg.architecture(4), rng, 0.2);
  const double loss = supervised_loss(t.linear, theta, batch, cfg);
  std::swap(batch[0], batch[2]);
  CHECK(supervised_loss(t.linear, theta, batch, cfg) == doctest::Approx(loss).epsilon(1e-14));

  // Truth equal to the zero-theta output gives zero loss and zero gradient.
  std::vector<SamplePair> exact{batch[1]};
  exact[0].f_true = fbp(t.linear.ray(), exact[0].g, RampFilterSpec::ramp());
  const LossGradient lg = loss_gradient(t.linear, zero, exact, cfg);
  CHECK(lg.loss == 0.0);
  for (double v : lg.gradient.values) CHECK(v == 0.0);
}

TEST_CASE("full-pipeline gradient matches central finite differences") {
  Tiny t;
  for (const ForwardModel* model : {&t.linear, &t.beer_lambert}) {
    for (GradientMode mode : {GradientMode::both, GradientMode::data_only, GradientMode::none}) {
      const SolverConfig cfg = small_config(mode, *model);
      Rng rng(74 + static_cast<int>(mode));
      const NetParams theta = random_theta(cfg.architecture(4), rng, 0.15);
      const auto batch = make_batch(*model, 3, 2);
      const LossGradient lg = loss_gradient(*model, theta, batch, cfg);
      CHECK(lg.loss == doctest::Approx(supervised_loss(*model, theta, batch, cfg)).epsilon(1e-13));

      std::vector<double> fd(theta.values.size());
      const double h = 1e-6;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        NetParams tp = theta;
        NetParams tm = theta;
        tp.values[i] += h;
        tm.values[i] -= h;
        fd[i] = (supervised_loss(*model, tp, batch, cfg) - supervised_loss(*model, tm, batch, cfg)) / (2.0 * h);
      }
      INFO("forward " << to_string(model->kind()) << ", mode " << to_string(mode));
      CHECK(testing::rel_l2(lg.gradient.values, fd) <= 1e-4);
    }
  }
}

TEST_CASE("gradient-mode ablations drop the matching input channels") {
  const SolverConfig both{10, 5, GradientMode::both};
  const SolverConfig data{10, 5, GradientMode::data_only};
  const SolverConfig none{10, 5, GradientMode::none};
  const NetParams tb = NetParams::zeros(both.architecture(32));
  const NetParams td = NetParams::zeros(data.architecture(32));
  const NetParams tn = NetParams::zeros(none.architecture(32));
  CHECK(tb.in_channels(0) == 8);
  CHECK(td.in_channels(0) == 7);
  CHECK(tn.in_channels(0) == 6);
  CHECK(tb.parameter_count() - td.parameter_count() == 32 * 9);
  CHECK(td.parameter_count() - tn.parameter_count() == 32 * 9);
}

TEST_CASE("projector calls per reconstruction") {
  Tiny t;
  const auto batch = make_batch(t.linear, 4, 1);
  for (GradientMode mode : {GradientMode::both, GradientMode::data_only, GradientMode::none}) {
    SolverConfig cfg = small_config(mode, t.linear);
    cfg.iterations = 5;
    t.linear.ray().reset_call_counts();
    Rng rng(76);
    (void)reconstruct(t.linear, batch[0].g, random_theta(cfg.architecture(4), rng, 0.1), cfg);
    const auto counts = t.linear.ray().call_counts();
    const std::uint64_t per_iteration = mode == GradientMode::none ? 0 : 1;
    INFO("mode " << to_string(mode));
    CHECK(counts.forward == 5 * per_iteration);
    CHECK(counts.adjoint == 5 * per_iteration);
  }
}

TEST_CASE("reconstruction and gradients are bit-identical across runs and worker counts") {
  const ImageGrid grid = ImageGrid::square(16);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 9);
  const ForwardModel serial(RayTransform(grid, geom, 1));
  const ForwardModel threaded(RayTransform(grid, geom, 4));
  SolverConfig cfg = small_config(GradientMode::both, serial);
  cfg.iterations = 3;
  Rng rng(77);
  const NetParams theta = random_theta(cfg.architecture(6), rng, 0.1);
  const auto batch = make_batch(serial, 5, 3);
  const Image a = reconstruct(serial, batch[0].g, theta, cfg);
  CHECK(reconstruct(serial, batch[0].g, theta, cfg).values == a.values);
  CHECK(reconstruct(threaded, batch[0].g, theta, cfg).values == a.values);
  const LossGradient g1 = loss_gradient(serial, theta, batch, cfg, 1);
  const LossGradient g3 = loss_gradient(threaded, theta, batch, cfg, 3);
  CHECK(g1.loss == g3.loss);
  CHECK(g1.gradient.values == g3.gradient.values);
}

TEST_CASE("non-finite iterates raise a numerical error") {
  Tiny t;
  const auto batch = make_batch(t.linear, 6, 1);
  const SolverConfig cfg = small_config(GradientMode::both, t.linear);
  NetParams theta = NetParams::zeros(cfg.architecture(4));
  for (double& v : theta.values) v = 1e250;
  CHECK_THROWS_AS((void)reconstruct(t.linear, batch[0].g, theta, cfg), NumericalError);
  CHECK_THROWS_AS((void)reconstruct(t.linear, batch[0].g, NetParams::zeros(SolverConfig{}.architecture(4)), cfg),
                  ConfigError);
}

TEST_CASE("learning-rate schedule") {
  TrainSchedule s;
  s.batches = 2000;
  s.lr_end = 1e-5;
  CHECK(s.learning_rate(0) == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(s.learning_rate(1999) == doctest::Approx(1e-5).epsilon(1e-12));
  const double mid = s.learning_rate(1000);
  CHECK(mid == doctest::Approx(1e-3 / (1.0 + 1000.0 * 99.0 / 1999.0)).epsilon(1e-14));
  for (int i = 1; i < 2000; ++i) CHECK(s.learning_rate(i) < s.learning_rate(i - 1));
  s.lr_end = 2e-3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("training: zero batches, determinism and metrics") {
  Tiny t;
  const SolverConfig cfg = small_config(GradientMode::both, t.linear);
  const SampleStream stream(9, t.linear, NoiseSpec::gaussian(0.05));
  Rng rng(78);
  const NetParams initial = init_params(rng, cfg.architecture(4), InitScheme::he_uniform, 0.1);

  TrainSchedule none;
  none.batches = 0;
  none.validation_size = 2;
  const TrainResult idle = train(none, cfg, stream, initial);
  CHECK(idle.theta == initial);
  CHECK(idle.steps_completed == 0);

  TrainSchedule ten;
  ten.batches = 10;
  ten.batch_size = 2;
  ten.validation_size = 2;
  std::ostringstream metrics;
  const fs::path dir = scratch_dir("train");
  const TrainResult r1 = train(ten, cfg, stream, initial, TrainOptions{dir, &metrics, 1});
  const TrainResult r2 = train(ten, cfg, stream, initial, TrainOptions{{}, nullptr, 2});
  CHECK(r1.steps_completed == 10);
  CHECK_FALSE(r1.diverged);
  CHECK(r1.theta == r2.theta);
  REQUIRE(r1.log.size() == 10);
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].loss == r2.log[i].loss);
    CHECK(r1.log[i].lr == ten.learning_rate(static_cast<int>(i)));
  }
  CHECK(r1.theta != initial);
  CHECK(r1.validation.size() >= 2);
  CHECK(r1.validation.front().step == 0);

  int lines = 0;
  std::istringstream in(metrics.str());
  for (std::string line; std::getline(in, line);) lines += line.find("\"loss\"") != std::string::npos ? 1 : 0;
  CHECK(lines >= 10);

  const Checkpoint saved = load_checkpoint(dir);
  CHECK(saved.theta == r1.theta);
  CHECK(saved.info.step == 10);
  fs::remove_all(dir);
}

TEST_CASE("checkpoints round trip and enforce the channel contract") {
  const SolverConfig cfg{10, 5, GradientMode::both};
  Rng rng(79);
  const NetParams theta = init_params(rng, cfg.architecture(8));
  const fs::path a = scratch_dir("ckpt_a");
  const fs::path b = scratch_dir("ckpt_b");
  save_checkpoint(a, theta, CheckpointInfo{ImageGrid::square(64), 42, 2000});
  const Checkpoint loaded = load_checkpoint(a);
  CHECK(loaded.theta == theta);
  CHECK(loaded.info.seed == 42);
  CHECK(loaded.info.step == 2000);
  CHECK(loaded.info.grid == ImageGrid::square(64));
  save_checkpoint(b, loaded.theta, loaded.info);
  for (const auto& entry : fs::directory_iterator(a))
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));

  CHECK(warm_start(a, cfg) == theta);
  const SolverConfig smaller{10, 4, GradientMode::both};
  CHECK_THROWS_AS((void)warm_start(a, smaller), ConfigError);
  const SolverConfig other_mode{10, 5, GradientMode::none};
  CHECK_THROWS_AS((void)warm_start(a, other_mode), ConfigError);

  CHECK_THROWS_AS((void)load_checkpoint(a / "missing"), IoError);
  { std::ofstream(a / "manifest.txt") << "not a checkpoint\n"; }
  CHECK_THROWS_AS((void)load_checkpoint(a), IoError);
  fs::remove_all(a);
  fs::remove_all(b);
}
