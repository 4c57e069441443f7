#pragma once

// Experiment orchestration: configuration, data sets, the three-way method
// comparison, the gradient-input ablation and image export.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "uct/learned_solver.hpp"
#include "uct/noise.hpp"
#include "uct/phantoms.hpp"
#include "uct/physics.hpp"
#include "uct/tv.hpp"

namespace uct {

/// Every knob of one experiment. Text form is "key = value" per line with
/// '#' comments; see write_config() for the full list and defaults.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  int grid_size = 64;     // n x n pixels of 1 mm
  int angles = 30;
  ForwardKind forward = ForwardKind::linear;
  BeerLambertParams beer_lambert;
  NoiseSpec::Kind noise = NoiseSpec::Kind::gaussian;
  double noise_level = 0.05;
  double ellipse_negative_probability = 0.5;

  SolverConfig solver;
  int hidden = 32;
  bool normalize_gradients = true;
  double init_output_scale = 0.0;
  TrainSchedule schedule;

  std::vector<double> fbp_bandwidths{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> tv_weights{0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.2, 0.3, 0.5};
  int tv_iterations = 1000;
  double cp_theta = 1.0;
  double cp_step_ratio = 1.0;
  double cp_gradient_scale = 0.0;  // 0: balanced automatically
  int tuning_size = 4;  // random phantoms used for the FBP / TV parameter search

  int timing_runs = 5;
  int workers = 1;
  double window_lo = 0.0;
  double window_hi = 1.0;
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint;  // empty: <output_dir>/checkpoint_<mode>
  bool train_if_missing = true;

  void validate() const;
  [[nodiscard]] ImageGrid grid() const { return ImageGrid::square(grid_size); }
  [[nodiscard]] ParallelGeometry geometry() const { return ParallelGeometry::covering(grid(), angles); }
  [[nodiscard]] ForwardModel model(int ray_workers = 1) const;
  [[nodiscard]] NoiseSpec noise_spec() const;
  [[nodiscard]] SampleStream stream() const;
  [[nodiscard]] CpConfig cp_config() const;
  /// Solver settings for `mode` with the gradient scales filled in.
  [[nodiscard]] SolverConfig solver_for(GradientMode mode) const;
  [[nodiscard]] std::filesystem::path checkpoint_path(GradientMode mode) const;
};

/// Applies "key = value" lines on top of `base`. Throws ConfigError naming
/// the line for unknown keys or bad values.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Sets one key; the same parser used for files.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

/// 10 log10(max(ref)^2 / MSE) with the unweighted per-pixel MSE. Returns
/// +infinity when f == ref. Throws ValidationError if max(ref) <= 0.
double psnr(const Image& f, const Image& ref);

/// Clamps to [lo, hi], maps linearly to 0..255 and writes a binary PGM with
/// +y pointing up. The raw dump goes next to it with extension ".uct".
void export_image(const Image& f, double lo, double hi, const std::filesystem::path& pgm_path);

/// Median wall time in milliseconds over `runs` timed calls after one
/// discarded warm-up call.
double median_runtime_ms(const std::function<void()>& fn, int runs);

/// Noisy Shepp-Logan test case of the experiment.
SamplePair test_sample(const ExperimentConfig& cfg, const ForwardModel& model);
/// Held-out random phantoms used to pick FBP and TV parameters.
std::vector<SamplePair> tuning_set(const ExperimentConfig& cfg);

inline constexpr std::uint64_t kTuningBatch = (std::uint64_t{1} << 62) + 1;

double tune_fbp_bandwidth(const ExperimentConfig& cfg, const ForwardModel& model, std::span<const SamplePair> set);
double tune_tv_weight(const ExperimentConfig& cfg, const ForwardModel& model, std::span<const SamplePair> set);

struct ReportRow {
  std::string method;
  double psnr_db = 0.0;
  double runtime_ms = 0.0;
  std::string parameters;  // tuned value or checkpoint reference
  int input_channels = 0;  // ablation rows only
  std::optional<double> reference_psnr_db;
  std::optional<double> reference_runtime_ms;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::uint64_t fixture_hash = 0;
  Image truth;
  Image fbp;
  Image tv;
  Image learned;
  std::vector<Image> learned_trace;
  std::vector<double> tv_objective;
  double fbp_bandwidth = 1.0;
  double tv_weight = 0.0;
};

struct AblationReport {
  std::vector<ReportRow> rows;  // none, data_only, both
  std::uint64_t fixture_hash = 0;
  std::vector<TrainResult> training;
};

/// Loads the checkpoint for `mode`, or trains and saves one when it is missing
/// and train_if_missing is set (ConfigError otherwise).
NetParams obtain_parameters(const ExperimentConfig& cfg, GradientMode mode, TrainResult* training = nullptr,
                            std::ostream* log = nullptr);

/// FBP (tuned Hann), TV (tuned lambda) and the learned solver on the same
/// noisy Shepp-Logan sinogram. `theta` overrides the checkpoint lookup.
ComparisonReport run_comparison(const ExperimentConfig& cfg, const NetParams* theta = nullptr,
                                std::ostream* log = nullptr);

/// Trains (or loads) one model per gradient mode under the same seed and
/// schedule. `both` may supply an already trained full model.
AblationReport run_ablation(const ExperimentConfig& cfg, const NetParams* both = nullptr,
                            std::ostream* log = nullptr);

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, const ExperimentConfig& cfg,
                  std::uint64_t fixture_hash);
void write_report_json(const std::filesystem::path& path, const std::vector<ReportRow>& rows,
                       const ExperimentConfig& cfg, std::uint64_t fixture_hash);

/// Writes `count` samples of batch 0 as phantom / sinogram dumps plus a
/// manifest listing fixture hashes. Returns the samples.
std::vector<SamplePair> generate_dataset(const ExperimentConfig& cfg, int count, const std::filesystem::path& dir);

}  // namespace uct
