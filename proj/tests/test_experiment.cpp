#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "support.hpp"
#include "uct/checkpoint.hpp"
#include "uct/errors.hpp"
#include "uct/experiment.hpp"

using namespace uct;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uct_exp_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small enough to train and compare in a few seconds.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.grid_size = 16;
  cfg.angles = 8;
  cfg.hidden = 4;
  cfg.solver.iterations = 2;
  cfg.solver.memory = 2;
  cfg.schedule.batches = 3;
  cfg.schedule.batch_size = 2;
  cfg.schedule.validation_size = 2;
  cfg.fbp_bandwidths = {0.5, 1.0};
  cfg.tv_weights = {0.02, 0.1};
  cfg.tv_iterations = 30;
  cfg.tuning_size = 2;
  cfg.timing_runs = 5;
  cfg.output_dir = out;
  return cfg;
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream s;
  write_config(s, cfg);
  return s.str();
}

}  // namespace

TEST_CASE("configuration text round trips") {
  ExperimentConfig cfg = tiny_config("somewhere");
  cfg.forward = ForwardKind::beer_lambert;
  cfg.noise = NoiseSpec::Kind::poisson;
  cfg.solver.mode = GradientMode::data_only;
  cfg.solver.precision = Precision::f32;
  cfg.schedule.lr_end = 3.25e-5;
  cfg.beer_lambert.mu = 0.0195;
  std::istringstream in(config_text(cfg));
  const ExperimentConfig back = parse_config(in);
  CHECK(config_text(back) == config_text(cfg));
  CHECK(back.forward == ForwardKind::beer_lambert);
  CHECK(back.schedule.lr_end == 3.25e-5);
  CHECK(back.tv_weights == cfg.tv_weights);
}

TEST_CASE("configuration errors name the problem") {
  std::istringstream unknown("seed = 3\nlearning_speed = 9\n");
  CHECK_THROWS_WITH_AS((void)parse_config(unknown), doctest::Contains("line 2"), ConfigError);
  std::istringstream malformed("angles 30\n");
  CHECK_THROWS_AS((void)parse_config(malformed), ConfigError);
  std::istringstream bad_value("angles = many\n");
  CHECK_THROWS_AS((void)parse_config(bad_value), ConfigError);
  std::istringstream comments("# only a comment\n\n  angles = 12  # trailing\n");
  CHECK(parse_config(comments).angles == 12);

  ExperimentConfig cfg;
  set_config_value(cfg, "gradient_mode", "none");
  CHECK(cfg.solver.mode == GradientMode::none);
  CHECK_THROWS_AS(set_config_value(cfg, "gradient_mode", "some"), ConfigError);
  cfg.grid_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS((void)load_config("/nonexistent/uct.cfg"), ConfigError);
}

TEST_CASE("PSNR") {
  const ImageGrid grid = ImageGrid::square(8);
  Rng rng(101);
  Image ref = testing::random_image(grid, rng, 0.0, 1.0);
  ref.values[5] = 1.0;  // peak exactly 1
  Image f = ref;
  for (double& v : f.values) v += 0.1;
  CHECK(psnr(f, ref) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(ref, ref) == std::numeric_limits<double>::infinity());
  Image f2 = f;
  Image ref2 = ref;
  scale(f2, 2.0);
  scale(ref2, 2.0);
  CHECK(psnr(f2, ref2) == doctest::Approx(psnr(f, ref)).epsilon(1e-12));
  CHECK_THROWS_AS((void)psnr(f, Image(grid)), ValidationError);
}

TEST_CASE("PGM export") {
  const fs::path dir = scratch_dir("pgm");
  const ImageGrid grid(5, 3, 5.0, 3.0);
  export_image(Image(grid, -0.5), 0.0, 1.0, dir / "black.pgm");
  export_image(Image(grid, 1.0), 0.0, 1.0, dir / "white.pgm");
  const std::string header = "P5\n5 3\n255\n";
  const std::string black = slurp(dir / "black.pgm");
  const std::string white = slurp(dir / "white.pgm");
  REQUIRE(black.size() == header.size() + 15);
  CHECK(black.substr(0, header.size()) == header);
  CHECK(black.substr(header.size()) == std::string(15, '\0'));
  CHECK(white.substr(header.size()) == std::string(15, '\xff'));
  CHECK(fs::exists(dir / "black.uct"));

  Image ramp(grid);
  ramp.at(0, 0) = 1.0;  // bottom-left pixel, written on the last PGM row
  export_image(ramp, 0.0, 1.0, dir / "corner.pgm");
  const std::string corner = slurp(dir / "corner.pgm");
  CHECK(static_cast<unsigned char>(corner[header.size() + 10]) == 255);
  CHECK(static_cast<unsigned char>(corner[header.size()]) == 0);

  CHECK_THROWS_AS(export_image(ramp, 0.0, 1.0, "/nonexistent/dir/x.pgm"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("median runtime") {
  int calls = 0;
  const double ms = median_runtime_ms([&] { ++calls; }, 5);
  CHECK(calls == 6);
  CHECK(ms >= 0.0);
}

TEST_CASE("comparison and ablation reports on a tiny setup") {
  const fs::path dir = scratch_dir("report");
  const ExperimentConfig cfg = tiny_config(dir);
  std::ostringstream log;
  const ComparisonReport a = run_comparison(cfg, nullptr, &log);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.rows[0].method == "FBP");
  CHECK(a.rows[1].method == "TV");
  CHECK(a.rows[2].method == "Learned");
  CHECK(a.rows[0].reference_psnr_db == 19.75);
  CHECK(a.rows[1].reference_psnr_db == 29.83);
  CHECK(a.rows[2].reference_psnr_db == 32.02);
  CHECK(a.rows[2].reference_runtime_ms == 58.0);
  CHECK(a.tv_objective.size() == 30);
  CHECK(a.learned_trace.size() == 3);
  CHECK(fs::exists(cfg.checkpoint_path(GradientMode::both) / "manifest.txt"));

  // Second run loads the checkpoint; everything but timings repeats exactly.
  const ComparisonReport b = run_comparison(cfg);
  CHECK(b.fixture_hash == a.fixture_hash);
  for (std::size_t i = 0; i < 3; ++i) CHECK(b.rows[i].psnr_db == a.rows[i].psnr_db);
  CHECK(b.learned.values == a.learned.values);

  const AblationReport ab = run_ablation(cfg);
  REQUIRE(ab.rows.size() == 3);
  CHECK(ab.fixture_hash == a.fixture_hash);
  CHECK(ab.rows[0].input_channels == 3);
  CHECK(ab.rows[1].input_channels == 4);
  CHECK(ab.rows[2].input_channels == 5);
  CHECK(ab.rows[0].reference_psnr_db == 29.65);
  CHECK(ab.rows[1].reference_psnr_db == 30.51);
  CHECK(ab.rows[2].reference_psnr_db == 32.02);
  CHECK(ab.rows[2].psnr_db == a.rows[2].psnr_db);

  std::ostringstream table;
  write_report(table, a.rows, cfg, a.fixture_hash);
  CHECK(table.str().find("Learned") != std::string::npos);
  write_report_json(dir / "r.json", a.rows, cfg, a.fixture_hash);
  CHECK(slurp(dir / "r.json").find("\"psnr_db\"") != std::string::npos);

  ExperimentConfig strict = cfg;
  strict.train_if_missing = false;
  strict.output_dir = dir / "empty";
  CHECK_THROWS_AS((void)run_comparison(strict), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("generated datasets are reproducible") {
  const fs::path d1 = scratch_dir("gen1");
  const fs::path d2 = scratch_dir("gen2");
  const ExperimentConfig cfg = tiny_config(d1);
  const auto s1 = generate_dataset(cfg, 3, d1);
  const auto s2 = generate_dataset(cfg, 3, d2);
  REQUIRE(s1.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s1[i].g.values == s2[i].g.values);
  CHECK(slurp(d1 / "manifest.txt") == slurp(d2 / "manifest.txt"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

#ifdef UCT_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UCT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir("cli");
  const std::string base = " --seed 7 --set output_dir=" + dir.string() + " --set grid_size=16 --set angles=8";
  {
    std::ofstream cfg(dir / "ok.cfg");
    cfg << "tv_iterations = 20\n";
  }
  CHECK(run_cli("fbp --config " + (dir / "ok.cfg").string() + base) == 0);
  CHECK(fs::exists(dir / "fbp.pgm"));
  CHECK(fs::exists(dir / "resolved_fbp.cfg"));
  CHECK(run_cli("tv --lambda 0.05 --config " + (dir / "ok.cfg").string() + base) == 0);
  CHECK(fs::exists(dir / "tv_objective.jsonl"));
  CHECK(run_cli("generate --count 2 --dir " + (dir / "data").string() + base) == 0);
  CHECK(run_cli("export --input " + (dir / "fbp.uct").string() + " --out " + (dir / "again.pgm").string() + base) == 0);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "tv_iterations = 0\n";
  }
  CHECK(run_cli("fbp --config " + (dir / "bad.cfg").string() + base) == 2);
  CHECK(run_cli("fbp --set no_such_key=1" + base) == 2);
  CHECK(run_cli("fbp --bandwidth 1.5" + base) == 2);
  CHECK(run_cli("fbp --config /nonexistent.cfg" + base) == 2);
  CHECK(run_cli("frobnicate") == 2);

  // A checkpoint whose weights overflow makes the iterates non-finite.
  SolverConfig solver;
  solver.memory = 5;
  NetParams huge = NetParams::zeros(solver.architecture(4));
  for (double& v : huge.values) v = 1e250;
  save_checkpoint(dir / "huge", huge, CheckpointInfo{ImageGrid::square(16), 7, 0});
  CHECK(run_cli("reconstruct --checkpoint " + (dir / "huge").string() + base + " --set hidden=4") == 3);
  fs::remove_all(dir);
}
#endif
