// uct: command line front end for data generation, training, reconstruction
// and the evaluation runs.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 other.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "uct/checkpoint.hpp"
#include "uct/dump.hpp"
#include "uct/errors.hpp"
#include "uct/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.seed = s, c.seed_set = true; }, "master seed");
  cmd->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
}

uct::ExperimentConfig resolve(const Common& c, const std::string& command) {
  uct::ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = uct::load_config(c.config_path);
  if (c.seed_set) cfg.seed = c.seed;
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw uct::ConfigError("--set expects key=value, got '" + kv + "'");
    uct::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  std::ofstream echo(cfg.output_dir / ("resolved_" + command + ".cfg"));
  uct::write_config(echo, cfg);
  return cfg;
}

uct::Sinogram input_sinogram(const uct::ExperimentConfig& cfg, const uct::ForwardModel& model,
                             const std::string& path, uct::Image* truth) {
  if (!path.empty()) return uct::read_sinogram_dump(path, model.ray().geometry());
  uct::SamplePair s = uct::test_sample(cfg, model);
  if (truth != nullptr) *truth = s.f_true;
  return s.g;
}

void finish_image(const uct::ExperimentConfig& cfg, const uct::Image& f, const uct::Image& truth,
                  const fs::path& out) {
  uct::export_image(f, cfg.window_lo, cfg.window_hi, out);
  std::cout << "wrote " << out.string() << '\n';
  if (!truth.values.empty()) std::cout << "PSNR " << uct::psnr(f, truth) << " dB\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned iterative and classical CT reconstruction"};
  app.require_subcommand(1);
  Common common;

  int count = 16;
  std::string data_dir = "data";
  auto* generate = app.add_subcommand("generate", "write random phantom / sinogram pairs");
  add_common(generate, common);
  generate->add_option("--count", count, "number of samples");
  generate->add_option("--dir", data_dir, "output directory");

  auto* train = app.add_subcommand("train", "train the learned solver");
  add_common(train, common);

  std::string sinogram_path;
  std::string out_path;
  std::string checkpoint_path;
  bool write_trace = false;
  auto* reconstruct = app.add_subcommand("reconstruct", "learned reconstruction of one sinogram");
  add_common(reconstruct, common);
  reconstruct->add_option("--sinogram", sinogram_path, "sinogram dump (default: noisy Shepp-Logan)");
  reconstruct->add_option("--checkpoint", checkpoint_path, "checkpoint directory");
  reconstruct->add_option("--out", out_path, "output PGM path");
  reconstruct->add_flag("--trace", write_trace, "also export every iterate");

  double bandwidth = 1.0;
  bool ramp_only = false;
  auto* fbp_cmd = app.add_subcommand("fbp", "filtered back-projection");
  add_common(fbp_cmd, common);
  fbp_cmd->add_option("--sinogram", sinogram_path, "sinogram dump (default: noisy Shepp-Logan)");
  fbp_cmd->add_option("--bandwidth", bandwidth, "Hann window bandwidth in (0, 1]");
  fbp_cmd->add_flag("--ramp", ramp_only, "pure ramp filter, no window");
  fbp_cmd->add_option("--out", out_path, "output PGM path");

  double lambda = 1.0;
  auto* tv_cmd = app.add_subcommand("tv", "TV reconstruction (Chambolle-Pock)");
  add_common(tv_cmd, common);
  tv_cmd->add_option("--sinogram", sinogram_path, "sinogram dump (default: noisy Shepp-Logan)");
  tv_cmd->add_option("--lambda", lambda, "TV weight");
  tv_cmd->add_option("--out", out_path, "output PGM path");

  auto* compare = app.add_subcommand("compare", "FBP vs TV vs learned report");
  add_common(compare, common);

  auto* ablate = app.add_subcommand("ablate", "gradient-input ablation report");
  add_common(ablate, common);

  std::string dump_path;
  auto* export_cmd = app.add_subcommand("export", "convert an image dump to PGM");
  add_common(export_cmd, common);
  export_cmd->add_option("--input", dump_path, "image dump")->required();
  export_cmd->add_option("--out", out_path, "output PGM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const uct::ExperimentConfig cfg = resolve(common, command);
    const uct::ForwardModel model = cfg.model(cfg.workers);
    const fs::path out_dir = cfg.output_dir;

    if (command == "generate") {
      const auto samples = uct::generate_dataset(cfg, count, data_dir);
      std::cout << "wrote " << samples.size() << " samples to " << data_dir << '\n';
    } else if (command == "train") {
      uct::TrainResult result;
      (void)uct::obtain_parameters(cfg, cfg.solver.mode, &result, &std::cout);
      std::cout << "checkpoint " << cfg.checkpoint_path(cfg.solver.mode).string() << '\n';
    } else if (command == "reconstruct") {
      const fs::path cp = checkpoint_path.empty() ? cfg.checkpoint_path(cfg.solver.mode) : fs::path(checkpoint_path);
      const uct::SolverConfig solver = cfg.solver_for(cfg.solver.mode);
      const uct::NetParams theta = uct::warm_start(cp, solver);
      uct::Image truth;
      const uct::Sinogram g = input_sinogram(cfg, model, sinogram_path, &truth);
      std::vector<uct::Image> trace;
      const uct::Image f = uct::reconstruct(model, g, theta, solver, &trace);
      finish_image(cfg, f, truth, out_path.empty() ? out_dir / "learned.pgm" : fs::path(out_path));
      if (write_trace)
        for (std::size_t i = 0; i < trace.size(); ++i)
          uct::export_image(trace[i], cfg.window_lo, cfg.window_hi, out_dir / ("iterate_" + std::to_string(i) + ".pgm"));
    } else if (command == "fbp") {
      uct::Image truth;
      const uct::Sinogram g = input_sinogram(cfg, model, sinogram_path, &truth);
      const auto filter = ramp_only ? uct::RampFilterSpec::ramp() : uct::RampFilterSpec::hann(bandwidth);
      filter.validate();
      finish_image(cfg, uct::fbp(model.ray(), g, filter), truth, out_path.empty() ? out_dir / "fbp.pgm" : fs::path(out_path));
    } else if (command == "tv") {
      uct::Image truth;
      const uct::Sinogram g = input_sinogram(cfg, model, sinogram_path, &truth);
      const uct::TvResult tv = uct::chambolle_pock_tv(model, g, lambda, cfg.cp_config());
      std::ofstream trace(out_dir / "tv_objective.jsonl");
      trace.precision(17);
      for (std::size_t i = 0; i < tv.objective.size(); ++i)
        trace << "{\"step\":" << i + 1 << ",\"loss\":" << tv.objective[i] << ",\"lr\":" << tv.tau
              << ",\"seconds\":0}\n";
      finish_image(cfg, tv.f, truth, out_path.empty() ? out_dir / "tv.pgm" : fs::path(out_path));
    } else if (command == "compare") {
      const uct::ComparisonReport r = uct::run_comparison(cfg, nullptr, &std::cout);
      uct::write_report(std::cout, r.rows, cfg, r.fixture_hash);
      std::ofstream txt(out_dir / "comparison.txt");
      uct::write_report(txt, r.rows, cfg, r.fixture_hash);
      uct::write_report_json(out_dir / "comparison.json", r.rows, cfg, r.fixture_hash);
      uct::export_image(r.truth, cfg.window_lo, cfg.window_hi, out_dir / "truth.pgm");
      uct::export_image(r.fbp, cfg.window_lo, cfg.window_hi, out_dir / "fbp.pgm");
      uct::export_image(r.tv, cfg.window_lo, cfg.window_hi, out_dir / "tv.pgm");
      uct::export_image(r.learned, cfg.window_lo, cfg.window_hi, out_dir / "learned.pgm");
      for (std::size_t i = 0; i < r.learned_trace.size(); ++i)
        uct::write_dump(out_dir / ("learned_iterate_" + std::to_string(i) + ".uct"), r.learned_trace[i]);
    } else if (command == "ablate") {
      const uct::AblationReport r = uct::run_ablation(cfg, nullptr, &std::cout);
      uct::write_report(std::cout, r.rows, cfg, r.fixture_hash);
      std::ofstream txt(out_dir / "ablation.txt");
      uct::write_report(txt, r.rows, cfg, r.fixture_hash);
      uct::write_report_json(out_dir / "ablation.json", r.rows, cfg, r.fixture_hash);
    } else if (command == "export") {
      const uct::RawArray raw = uct::read_dump(dump_path);
      const uct::ImageGrid grid(static_cast<int>(raw.cols), static_cast<int>(raw.rows), raw.cols, raw.rows);
      uct::export_image(uct::Image(grid, raw.values), cfg.window_lo, cfg.window_hi, out_path);
      std::cout << "wrote " << out_path << '\n';
    }
    return 0;
  } catch (const uct::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const uct::ShapeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const uct::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
