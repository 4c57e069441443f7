#include "uct/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "uct/checkpoint.hpp"
#include "uct/dump.hpp"
#include "uct/errors.hpp"

namespace uct {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

int to_int32(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
    throw ConfigError("'" + key + "' is out of range");
  return static_cast<int>(i);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long i = std::stoull(v, &used, 0);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma separated list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (grid_size < 4) throw ConfigError("grid_size must be >= 4");
  if (angles < 1) throw ConfigError("angles must be >= 1");
  if (!(ellipse_negative_probability >= 0.0 && ellipse_negative_probability <= 1.0))
    throw ConfigError("ellipse_negative_probability must lie in [0, 1]");
  if (forward == ForwardKind::beer_lambert) beer_lambert.validate();
  noise_spec().validate();
  if (forward == ForwardKind::linear && noise == NoiseSpec::Kind::poisson)
    throw ConfigError("poisson noise requires forward = beer_lambert");
  if (forward == ForwardKind::beer_lambert && noise == NoiseSpec::Kind::gaussian)
    throw ConfigError("beer_lambert data requires noise = poisson or none");
  solver.validate();
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (!(init_output_scale >= 0.0)) throw ConfigError("init_output_scale must be >= 0");
  schedule.validate();
  for (double b : fbp_bandwidths)
    if (!(b > 0.0 && b <= 1.0)) throw ConfigError("fbp_bandwidths must lie in (0, 1]");
  for (double w : tv_weights)
    if (!(w > 0.0)) throw ConfigError("tv_weights must be > 0");
  if (tv_iterations < 1) throw ConfigError("tv_iterations must be >= 1");
  if (cp_theta < 0.0 || cp_theta > 1.0) throw ConfigError("cp_theta must lie in [0, 1]");
  if (!(cp_step_ratio > 0.0)) throw ConfigError("cp_step_ratio must be > 0");
  if (cp_gradient_scale < 0.0) throw ConfigError("cp_gradient_scale must be >= 0");
  if (tuning_size < 1) throw ConfigError("tuning_size must be >= 1");
  if (timing_runs < 5) throw ConfigError("timing_runs must be >= 5");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(window_lo < window_hi)) throw ConfigError("window_lo must be < window_hi");
}

ForwardModel ExperimentConfig::model(int ray_workers) const {
  return ForwardModel(RayTransform(grid(), geometry(), ray_workers), forward, beer_lambert);
}

NoiseSpec ExperimentConfig::noise_spec() const {
  switch (noise) {
    case NoiseSpec::Kind::none: return NoiseSpec::none();
    case NoiseSpec::Kind::gaussian: return NoiseSpec::gaussian(noise_level);
    case NoiseSpec::Kind::poisson: return NoiseSpec::poisson();
  }
  return NoiseSpec::none();
}

SampleStream ExperimentConfig::stream() const {
  EllipseRanges ranges;
  ranges.negative_probability = ellipse_negative_probability;
  return SampleStream(seed, model(), noise_spec(), ranges);
}

CpConfig ExperimentConfig::cp_config() const {
  CpConfig cp;
  cp.iterations = tv_iterations;
  cp.theta = cp_theta;
  cp.step_ratio = cp_step_ratio;
  cp.gradient_scale = cp_gradient_scale;
  return cp;
}

SolverConfig ExperimentConfig::solver_for(GradientMode mode) const {
  SolverConfig out = solver;
  out.mode = mode;
  if (normalize_gradients) {
    const GradientScales scales = normalized_gradient_scales(model());
    out.data_scale = scales.data;
    out.reg_scale = scales.reg;
  }
  return out;
}

std::filesystem::path ExperimentConfig::checkpoint_path(GradientMode mode) const {
  if (!checkpoint.empty() && mode == solver.mode) return checkpoint;
  return output_dir / ("checkpoint_" + std::string(to_string(mode)));
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& v) {
  if (key == "seed") cfg.seed = to_u64(key, v);
  else if (key == "grid_size") cfg.grid_size = to_int32(key, v);
  else if (key == "angles") cfg.angles = to_int32(key, v);
  else if (key == "forward") cfg.forward = parse_forward_kind(v);
  else if (key == "photons") cfg.beer_lambert.photons = to_double(key, v);
  else if (key == "mu") cfg.beer_lambert.mu = to_double(key, v);
  else if (key == "noise") cfg.noise = parse_noise_kind(v);
  else if (key == "noise_level") cfg.noise_level = to_double(key, v);
  else if (key == "ellipse_negative_probability") cfg.ellipse_negative_probability = to_double(key, v);
  else if (key == "iterations") cfg.solver.iterations = to_int32(key, v);
  else if (key == "memory") cfg.solver.memory = to_int32(key, v);
  else if (key == "gradient_mode") cfg.solver.mode = parse_gradient_mode(v);
  else if (key == "init") cfg.solver.init = parse_init_kind(v);
  else if (key == "hidden") cfg.hidden = to_int32(key, v);
  else if (key == "init_output_scale") cfg.init_output_scale = to_double(key, v);
  else if (key == "normalize_gradients") cfg.normalize_gradients = to_bool(key, v);
  else if (key == "network_precision") cfg.solver.precision = parse_precision(v);
  else if (key == "batches") cfg.schedule.batches = to_int32(key, v);
  else if (key == "batch_size") cfg.schedule.batch_size = to_int32(key, v);
  else if (key == "lr_start") cfg.schedule.lr_start = to_double(key, v);
  else if (key == "lr_end") cfg.schedule.lr_end = to_double(key, v);
  else if (key == "checkpoint_every") cfg.schedule.checkpoint_every = to_int32(key, v);
  else if (key == "validate_every") cfg.schedule.validate_every = to_int32(key, v);
  else if (key == "validation_size") cfg.schedule.validation_size = to_int32(key, v);
  else if (key == "fbp_bandwidths") cfg.fbp_bandwidths = to_list(key, v);
  else if (key == "tv_weights") cfg.tv_weights = to_list(key, v);
  else if (key == "tv_iterations") cfg.tv_iterations = to_int32(key, v);
  else if (key == "cp_theta") cfg.cp_theta = to_double(key, v);
  else if (key == "cp_step_ratio") cfg.cp_step_ratio = to_double(key, v);
  else if (key == "cp_gradient_scale") cfg.cp_gradient_scale = to_double(key, v);
  else if (key == "tuning_size") cfg.tuning_size = to_int32(key, v);
  else if (key == "timing_runs") cfg.timing_runs = to_int32(key, v);
  else if (key == "workers") cfg.workers = to_int32(key, v);
  else if (key == "window_lo") cfg.window_lo = to_double(key, v);
  else if (key == "window_hi") cfg.window_hi = to_double(key, v);
  else if (key == "output_dir") cfg.output_dir = v;
  else if (key == "checkpoint") cfg.checkpoint = v;
  else if (key == "train_if_missing") cfg.train_if_missing = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << "# data\n"
      << "seed = " << cfg.seed << '\n'
      << "grid_size = " << cfg.grid_size << "  # pixels per side, 1 mm each\n"
      << "angles = " << cfg.angles << '\n'
      << "forward = " << to_string(cfg.forward) << "  # linear | beer_lambert\n"
      << "photons = " << cfg.beer_lambert.photons << '\n'
      << "mu = " << cfg.beer_lambert.mu << "  # per mm\n"
      << "noise = " << to_string(cfg.noise) << "  # none | gaussian | poisson\n"
      << "noise_level = " << cfg.noise_level << "  # gaussian sigma relative to mean |g|\n"
      << "ellipse_negative_probability = " << cfg.ellipse_negative_probability
      << "  # random phantoms: chance an ellipse subtracts\n"
      << "# learned solver\n"
      << "iterations = " << cfg.solver.iterations << '\n'
      << "memory = " << cfg.solver.memory << '\n'
      << "gradient_mode = " << to_string(cfg.solver.mode) << "  # both | data_only | none\n"
      << "init = " << to_string(cfg.solver.init) << "  # fbp | zero\n"
      << "hidden = " << cfg.hidden << '\n'
      << "init_output_scale = " << cfg.init_output_scale << "  # last-layer kernel gain at initialization\n"
      << "normalize_gradients = " << (cfg.normalize_gradients ? "true" : "false")
      << "  # scale gradient inputs by inverse Jacobian norms\n"
      << "network_precision = " << to_string(cfg.solver.precision) << "  # f64 | f32 convolution arithmetic\n"
      << "# training (rmsprop decay 0.9, epsilon 1e-10)\n"
      << "batches = " << cfg.schedule.batches << '\n'
      << "batch_size = " << cfg.schedule.batch_size << '\n'
      << "lr_start = " << cfg.schedule.lr_start << '\n'
      << "lr_end = " << cfg.schedule.lr_end << '\n'
      << "checkpoint_every = " << cfg.schedule.checkpoint_every << '\n'
      << "validate_every = " << cfg.schedule.validate_every << '\n'
      << "validation_size = " << cfg.schedule.validation_size << '\n'
      << "# baselines\n"
      << "fbp_bandwidths = " << join(cfg.fbp_bandwidths) << '\n'
      << "tv_weights = " << join(cfg.tv_weights) << '\n'
      << "tv_iterations = " << cfg.tv_iterations << '\n'
      << "cp_theta = " << cfg.cp_theta << '\n'
      << "cp_step_ratio = " << cfg.cp_step_ratio << "  # tau / sigma = ratio^2\n"
      << "cp_gradient_scale = " << cfg.cp_gradient_scale << "  # K = [T, c grad]; 0 balances the two blocks\n"
      << "tuning_size = " << cfg.tuning_size << '\n'
      << "# evaluation\n"
      << "timing_runs = " << cfg.timing_runs << '\n'
      << "workers = " << cfg.workers << '\n'
      << "window_lo = " << cfg.window_lo << '\n'
      << "window_hi = " << cfg.window_hi << '\n'
      << "output_dir = " << cfg.output_dir.string() << '\n'
      << "checkpoint = " << cfg.checkpoint.string() << '\n'
      << "train_if_missing = " << (cfg.train_if_missing ? "true" : "false") << '\n';
  out.flags(flags);
  out.precision(precision);
}

double psnr(const Image& f, const Image& ref) {
  require_same_space(f, ref);
  const double peak = *std::max_element(ref.values.begin(), ref.values.end());
  if (!(peak > 0.0)) throw ValidationError("PSNR reference must have a positive maximum");
  double sse = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double d = f.values[i] - ref.values[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(f.values.size());
  return 10.0 * std::log10(peak * peak / mse);
}

void export_image(const Image& f, double lo, double hi, const std::filesystem::path& pgm_path) {
  if (!(lo < hi)) throw ConfigError("export window needs lo < hi");
  const int nx = f.grid.nx;
  const int ny = f.grid.ny;
  std::vector<unsigned char> pixels(f.values.size());
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double v = std::clamp((f.at(ix, iy) - lo) / (hi - lo), 0.0, 1.0);
      pixels[static_cast<std::size_t>(ny - 1 - iy) * nx + ix] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  std::ofstream out(pgm_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + pgm_path.string());
  out << "P5\n" << nx << ' ' << ny << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("failed writing " + pgm_path.string());
  auto raw = pgm_path;
  raw.replace_extension(".uct");
  write_dump(raw, f);
}

double median_runtime_ms(const std::function<void()>& fn, int runs) {
  if (runs < 1) throw ConfigError("need at least one timed run");
  fn();
  std::vector<double> times;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

SamplePair test_sample(const ExperimentConfig& cfg, const ForwardModel& model) {
  NoiseSpec noise = cfg.noise_spec();
  noise.seed = derive_seed(cfg.seed, 0x7e57);
  return make_sample(shepp_logan(model.ray().grid(), true), model, noise);
}

std::vector<SamplePair> tuning_set(const ExperimentConfig& cfg) {
  return cfg.stream().batch(kTuningBatch, cfg.tuning_size, cfg.workers);
}

double tune_fbp_bandwidth(const ExperimentConfig& cfg, const ForwardModel& model, std::span<const SamplePair> set) {
  double best = cfg.fbp_bandwidths.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double bw : cfg.fbp_bandwidths) {
    double score = 0.0;
    for (const auto& s : set) score += psnr(fbp(model.ray(), s.g, RampFilterSpec::hann(bw)), s.f_true);
    if (score > best_score) {
      best_score = score;
      best = bw;
    }
  }
  return best;
}

double tune_tv_weight(const ExperimentConfig& cfg, const ForwardModel& model, std::span<const SamplePair> set) {
  double best = cfg.tv_weights.front();
  double best_score = -std::numeric_limits<double>::infinity();
  const CpConfig cp = cfg.cp_config();
  for (double w : cfg.tv_weights) {
    double score = 0.0;
    for (const auto& s : set) score += psnr(chambolle_pock_tv(model, s.g, w, cp).f, s.f_true);
    if (score > best_score) {
      best_score = score;
      best = w;
    }
  }
  return best;
}

NetParams obtain_parameters(const ExperimentConfig& cfg, GradientMode mode, TrainResult* training,
                            std::ostream* log) {
  const SolverConfig solver = cfg.solver_for(mode);
  const auto path = cfg.checkpoint_path(mode);
  if (std::filesystem::exists(path / "manifest.txt")) {
    if (log != nullptr) *log << "loading checkpoint " << path.string() << '\n';
    return warm_start(path, solver);
  }
  if (!cfg.train_if_missing)
    throw ConfigError("no checkpoint at " + path.string() + " and train_if_missing = false");
  if (log != nullptr)
    *log << "training gradient_mode=" << to_string(mode) << " for " << cfg.schedule.batches << " batches of "
         << cfg.schedule.batch_size << '\n';
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream metrics(cfg.output_dir / ("metrics_" + std::string(to_string(mode)) + ".jsonl"));
  Rng rng(derive_seed(cfg.seed, 0x1417));
  TrainOptions options{path, &metrics, cfg.workers};
  TrainResult result = train(cfg.schedule, solver, cfg.stream(), init_params(rng, solver.architecture(cfg.hidden), InitScheme::he_uniform, cfg.init_output_scale),
                             options);
  if (result.diverged) throw TrainingError("training diverged at " + result.diagnostic);
  if (log != nullptr && !result.validation.empty())
    *log << "validation loss " << result.validation.front().loss << " -> " << result.validation.back().loss << '\n';
  NetParams theta = result.theta;
  if (training != nullptr) *training = std::move(result);
  return theta;
}

namespace {

ReportRow learned_row(const std::string& name, const ExperimentConfig& cfg, const ForwardModel& model,
                      const SamplePair& test, const NetParams& theta, const SolverConfig& solver, Image* out) {
  Image f = reconstruct(model, test.g, theta, solver);
  ReportRow row;
  row.method = name;
  row.psnr_db = psnr(f, test.f_true);
  row.runtime_ms =
      median_runtime_ms([&] { (void)reconstruct(model, test.g, theta, solver); }, cfg.timing_runs);
  row.parameters = cfg.checkpoint_path(solver.mode).string();
  row.input_channels = theta.in_channels(0);
  if (out != nullptr) *out = std::move(f);
  return row;
}

}  // namespace

ComparisonReport run_comparison(const ExperimentConfig& cfg, const NetParams* theta, std::ostream* log) {
  cfg.validate();
  const ForwardModel model = cfg.model(1);
  const SamplePair test = test_sample(cfg, model);
  const std::vector<SamplePair> tuning = tuning_set(cfg);

  ComparisonReport report;
  report.truth = test.f_true;
  report.fixture_hash = fixture_hash(test.g.values);

  NetParams loaded;
  if (theta == nullptr) {
    loaded = obtain_parameters(cfg, cfg.solver.mode, nullptr, log);
    theta = &loaded;
  }

  report.fbp_bandwidth = tune_fbp_bandwidth(cfg, model, tuning);
  const RampFilterSpec filter = RampFilterSpec::hann(report.fbp_bandwidth);
  if (fixture_hash(test.g.values) != report.fixture_hash) throw UsageError("test sinogram changed");
  report.fbp = fbp(model.ray(), test.g, filter);
  ReportRow fbp_row{"FBP", psnr(report.fbp, test.f_true),
                    median_runtime_ms([&] { (void)fbp(model.ray(), test.g, filter); }, cfg.timing_runs),
                    "hann bandwidth " + std::to_string(report.fbp_bandwidth), 0, 19.75, 4.0};
  if (log != nullptr) *log << "FBP: " << fbp_row.psnr_db << " dB\n";

  report.tv_weight = tune_tv_weight(cfg, model, tuning);
  const CpConfig cp = cfg.cp_config();
  TvResult tv = chambolle_pock_tv(model, test.g, report.tv_weight, cp);
  report.tv = tv.f;
  report.tv_objective = tv.objective;
  ReportRow tv_row{"TV", psnr(report.tv, test.f_true),
                   median_runtime_ms([&] { (void)chambolle_pock_tv(model, test.g, report.tv_weight, cp); },
                                     cfg.timing_runs),
                   "lambda " + std::to_string(report.tv_weight) + ", " + std::to_string(cp.iterations) +
                       " iterations",
                   0, 29.83, 11963.0};
  if (log != nullptr) *log << "TV: " << tv_row.psnr_db << " dB\n";

  Image learned;
  const SolverConfig solver = cfg.solver_for(cfg.solver.mode);
  ReportRow learned_r = learned_row("Learned", cfg, model, test, *theta, solver, &learned);
  (void)reconstruct(model, test.g, *theta, solver, &report.learned_trace);
  report.learned = std::move(learned);
  learned_r.reference_psnr_db = 32.02;
  learned_r.reference_runtime_ms = 58.0;
  learned_r.input_channels = 0;
  if (log != nullptr) *log << "Learned: " << learned_r.psnr_db << " dB\n";

  report.rows = {fbp_row, tv_row, learned_r};
  return report;
}

AblationReport run_ablation(const ExperimentConfig& cfg, const NetParams* both, std::ostream* log) {
  cfg.validate();
  const ForwardModel model = cfg.model(1);
  const SamplePair test = test_sample(cfg, model);
  AblationReport report;
  report.fixture_hash = fixture_hash(test.g.values);
  const struct {
    GradientMode mode;
    const char* name;
    double ref_psnr;
    double ref_ms;
  } modes[] = {{GradientMode::none, "no gradients", 29.65, 19.0},
               {GradientMode::data_only, "data gradient", 30.51, 64.0},
               {GradientMode::both, "both gradients", 32.02, 66.0}};
  for (const auto& m : modes) {
    const SolverConfig solver = cfg.solver_for(m.mode);
    NetParams theta;
    TrainResult training;
    if (m.mode == GradientMode::both && both != nullptr) {
      theta = *both;
    } else {
      theta = obtain_parameters(cfg, m.mode, &training, log);
    }
    report.training.push_back(std::move(training));
    if (fixture_hash(test.g.values) != report.fixture_hash) throw UsageError("test sinogram changed");
    ReportRow row = learned_row(m.name, cfg, model, test, theta, solver, nullptr);
    row.reference_psnr_db = m.ref_psnr;
    row.reference_runtime_ms = m.ref_ms;
    if (log != nullptr)
      *log << m.name << ": " << row.psnr_db << " dB, " << row.runtime_ms << " ms, c0 = " << row.input_channels
           << '\n';
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, const ExperimentConfig& cfg,
                  std::uint64_t hash) {
  const auto flags = out.flags();
  out << "# grid " << cfg.grid_size << "x" << cfg.grid_size << ", " << cfg.angles << " angles, "
      << to_string(cfg.forward) << " forward model, " << to_string(cfg.noise) << " noise\n"
      << "# PSNR peak = max of ground truth; runtime = median of " << cfg.timing_runs
      << " runs after warm-up, single worker\n"
      << "# fixture hash " << std::hex << hash << std::dec << '\n'
      << "# reference columns: published full-scale values, not reproduced here\n";
  out << std::left << std::setw(16) << "method" << std::right << std::setw(10) << "PSNR dB" << std::setw(14)
      << "runtime ms" << std::setw(10) << "ref dB" << std::setw(12) << "ref ms" << std::setw(6) << "c0"
      << "  parameters\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(16) << r.method << std::right << std::setprecision(2) << std::setw(10)
        << r.psnr_db << std::setw(14) << std::setprecision(3) << r.runtime_ms << std::setprecision(2)
        << std::setw(10);
    if (r.reference_psnr_db) out << *r.reference_psnr_db; else out << "-";
    out << std::setw(12);
    if (r.reference_runtime_ms) out << std::setprecision(0) << *r.reference_runtime_ms; else out << "-";
    out << std::setw(6);
    if (r.input_channels > 0) out << r.input_channels; else out << "-";
    out << "  " << r.parameters << '\n';
  }
  out.flags(flags);
}

void write_report_json(const std::filesystem::path& path, const std::vector<ReportRow>& rows,
                       const ExperimentConfig& cfg, std::uint64_t hash) {
  nlohmann::json j;
  j["grid"] = cfg.grid_size;
  j["angles"] = cfg.angles;
  j["forward"] = std::string(to_string(cfg.forward));
  j["noise"] = std::string(to_string(cfg.noise));
  j["seed"] = cfg.seed;
  j["psnr_peak"] = "max of ground truth";
  j["timing_runs"] = cfg.timing_runs;
  std::ostringstream h;
  h << std::hex << hash;
  j["fixture_hash"] = h.str();
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"method", r.method}, {"psnr_db", r.psnr_db}, {"runtime_ms", r.runtime_ms},
                       {"parameters", r.parameters}};
    if (r.input_channels > 0) row["input_channels"] = r.input_channels;
    if (r.reference_psnr_db) row["reference_psnr_db"] = *r.reference_psnr_db;
    if (r.reference_runtime_ms) row["reference_runtime_ms"] = *r.reference_runtime_ms;
    j["rows"].push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<SamplePair> generate_dataset(const ExperimentConfig& cfg, int count, const std::filesystem::path& dir) {
  cfg.validate();
  if (count < 0) throw ConfigError("sample count must be >= 0");
  std::vector<SamplePair> samples = cfg.stream().batch(0, count, cfg.workers);
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  manifest << "# index phantom sinogram phantom_hash sinogram_hash\n" << std::hex;
  for (int i = 0; i < count; ++i) {
    const std::string stem = "sample_" + std::to_string(i);
    write_dump(dir / (stem + "_phantom.uct"), samples[i].f_true);
    write_dump(dir / (stem + "_sinogram.uct"), samples[i].g);
    manifest << std::dec << i << ' ' << stem << "_phantom.uct " << stem << "_sinogram.uct " << std::hex
             << fixture_hash(samples[i].f_true.values) << ' ' << fixture_hash(samples[i].g.values) << '\n';
  }
  return samples;
}

}  // namespace uct
