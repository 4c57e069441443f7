#include "uct/learned_solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "uct/checkpoint.hpp"
#include "uct/errors.hpp"
#include "uct/parallel.hpp"

namespace uct {

std::string_view to_string(InitKind kind) { return kind == InitKind::fbp ? "fbp" : "zero"; }

InitKind parse_init_kind(std::string_view text) {
  if (text == "fbp") return InitKind::fbp;
  if (text == "zero") return InitKind::zero;
  throw ConfigError("unknown init '" + std::string(text) + "' (expected fbp | zero)");
}

void SolverConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (memory < 0) throw ConfigError("memory must be >= 0");
  if (!(data_scale > 0.0) || !(reg_scale > 0.0) || !std::isfinite(data_scale) || !std::isfinite(reg_scale))
    throw ConfigError("gradient scales must be positive and finite");
}

namespace {

struct DirichletGradient {
  using domain_type = Image;
  using range_type = VectorField;
  [[nodiscard]] VectorField apply(const Image& h) const { return spatial_gradient(h); }
  [[nodiscard]] Image adjoint(const VectorField& v) const {
    Image out = spatial_divergence(v);
    scale(out, -1.0);
    return out;
  }
};

}  // namespace

GradientScales normalized_gradient_scales(const ForwardModel& model, int power_iterations) {
  const Image prototype(model.ray().grid());
  const double p = power_method_norm(model.ray(), prototype, power_iterations, 0x9d);
  double data_norm = p * p;
  if (model.kind() == ForwardKind::beer_lambert) {
    const BeerLambertParams& bl = model.params();
    data_norm *= bl.mu * bl.mu * bl.photons;  // T(0) = photons everywhere
  }
  const double g = power_method_norm(DirichletGradient{}, prototype, power_iterations, 0x9e);
  if (!(data_norm > 0.0) || !(g > 0.0)) throw NumericalError("gradient normalization found a zero operator norm");
  return {1.0 / data_norm, 1.0 / (g * g)};
}

Image initial_guess(const ForwardModel& model, const Sinogram& g, const SolverConfig& cfg) {
  if (g.geometry != model.ray().geometry()) throw ShapeError("sinogram geometry does not match the forward model");
  if (cfg.init == InitKind::zero) return Image(model.ray().grid());
  return fbp(model.ray(), g, RampFilterSpec::ramp());
}

namespace {

// Everything the backward pass needs from one forward run.
struct Tape {
  std::vector<Sinogram> forward_values;  // T(f_{i-1}); empty when no data gradient is used
  std::vector<UpdateActivations> activations;
};

struct Gradients {
  Image data;
  Image reg;
};

Gradients input_gradients(const ForwardModel& model, const Image& f, const Sinogram& g, const SolverConfig& cfg,
                          Sinogram* forward_value) {
  Gradients out;
  if (cfg.mode != GradientMode::none) {
    Sinogram fv = model.apply(f);
    out.data = model.discrepancy_gradient_from(fv, g);
    if (cfg.data_scale != 1.0) scale(out.data, cfg.data_scale);
    if (forward_value != nullptr) *forward_value = std::move(fv);
  }
  if (cfg.mode == GradientMode::both) {
    out.reg = grad_dirichlet(f);
    if (cfg.reg_scale != 1.0) scale(out.reg, cfg.reg_scale);
  }
  return out;
}

Image run(const ForwardModel& model, const Sinogram& g, const NetParams& theta, const SolverConfig& cfg,
          std::vector<Image>* trace, Tape* tape) {
  cfg.validate();
  theta.validate(cfg.memory, cfg.mode);
  const ImageGrid& grid = model.ray().grid();
  Image f = initial_guess(model, g, cfg);
  if (!f.all_finite()) throw NumericalError("initial reconstruction f_0 is not finite");
  if (trace != nullptr) trace->assign(1, f);
  FeatureMap memory(cfg.memory, grid.ny, grid.nx);

  for (int i = 1; i <= cfg.iterations; ++i) {
    Sinogram fv;
    Gradients grads = input_gradients(model, f, g, cfg, tape != nullptr ? &fv : nullptr);
    UpdateResult step =
        updating_operator(theta, memory, f.values, grads.data.values, grads.reg.values, cfg.precision);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] += step.delta[k];
    if (!f.all_finite()) throw NumericalError("iterate f_" + std::to_string(i) + " is not finite");
    memory = std::move(step.memory);
    if (tape != nullptr) {
      tape->forward_values.push_back(std::move(fv));
      tape->activations.push_back(std::move(step.saved));
    }
    if (trace != nullptr) trace->push_back(f);
  }
  return f;
}

// Per-sample loss ||f_I - f_true||^2 / B and its theta gradient.
double sample_gradient(const ForwardModel& model, const NetParams& theta, const SamplePair& pair,
                       const SolverConfig& cfg, double weight, NetParams& theta_grad) {
  Tape tape;
  const Image f_final = run(model, pair.g, theta, cfg, nullptr, &tape);
  require_same_space(f_final, pair.f_true);
  const double area = f_final.grid.pixel_area();
  const ImageGrid& grid = f_final.grid;

  double loss = 0.0;
  Image f_bar(grid);
  for (std::size_t k = 0; k < f_bar.values.size(); ++k) {
    const double r = f_final.values[k] - pair.f_true.values[k];
    loss += r * r;
    f_bar.values[k] = 2.0 * area * weight * r;
  }
  loss *= area;

  FeatureMap s_bar(cfg.memory, grid.ny, grid.nx);
  for (int i = cfg.iterations; i >= 1; --i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    UpdateCotangents c =
        vjp_updating_operator(theta, tape.activations[idx], s_bar, f_bar.values, theta_grad, cfg.precision);
    for (std::size_t k = 0; k < f_bar.values.size(); ++k) f_bar.values[k] += c.f[k];
    // The gradient maps have self-adjoint Jacobians, so their VJPs are the Jacobians themselves.
    if (!c.grad_data.empty()) {
      const Image h = model.discrepancy_hessian(tape.forward_values[idx], Image(grid, std::move(c.grad_data)));
      axpy(cfg.data_scale, h, f_bar);
    }
    if (!c.grad_reg.empty()) {
      const Image h = grad_dirichlet(Image(grid, std::move(c.grad_reg)));
      axpy(cfg.reg_scale, h, f_bar);
    }
    s_bar = std::move(c.memory);
  }
  return loss;
}

}  // namespace

Image reconstruct(const ForwardModel& model, const Sinogram& g, const NetParams& theta, const SolverConfig& cfg,
                  std::vector<Image>* trace) {
  return run(model, g, theta, cfg, trace, nullptr);
}

double supervised_loss(const ForwardModel& model, const NetParams& theta, std::span<const SamplePair> batch,
                       const SolverConfig& cfg, int workers) {
  if (batch.empty()) throw ConfigError("supervised loss needs a nonempty batch");
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t b) {
    const Image f = reconstruct(model, batch[b].g, theta, cfg);
    Image r = linear_combination(1.0, f, -1.0, batch[b].f_true);
    losses[b] = l2_norm_sq(r);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(batch.size());
}

LossGradient loss_gradient(const ForwardModel& model, const NetParams& theta, std::span<const SamplePair> batch,
                           const SolverConfig& cfg, int workers) {
  if (batch.empty()) throw ConfigError("loss gradient needs a nonempty batch");
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::vector<double> losses(batch.size());
  std::vector<NetParams> grads(batch.size(), NetParams(theta.channels));
  parallel_for(batch.size(), workers, [&](std::size_t b) {
    losses[b] = sample_gradient(model, theta, batch[b], cfg, weight, grads[b]);
  });
  LossGradient out{0.0, NetParams(theta.channels)};
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.loss += losses[b];
    for (std::size_t k = 0; k < out.gradient.values.size(); ++k) out.gradient.values[k] += grads[b].values[k];
  }
  out.loss *= weight;
  return out;
}

void TrainSchedule::validate() const {
  if (batches < 0) throw ConfigError("batches must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_end > 0.0) || !(lr_start >= lr_end))
    throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
  if (checkpoint_every < 0 || validate_every < 0) throw ConfigError("checkpoint/validation intervals must be >= 0");
  if (validation_size < 0) throw ConfigError("validation_size must be >= 0");
}

double TrainSchedule::learning_rate(int step) const {
  const double span = batches > 1 ? static_cast<double>(batches - 1) : 1.0;
  return lr_start / (1.0 + step * (lr_start / lr_end - 1.0) / span);
}

namespace {

void write_metrics_line(std::ostream& out, const TrainStepRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "{\"step\":%d,\"loss\":%.17g,\"lr\":%.17g,\"seconds\":%.6f}", r.step, r.loss,
                r.lr, r.seconds);
  out << buf << '\n';
}

}  // namespace

TrainResult train(const TrainSchedule& schedule, const SolverConfig& cfg, const SampleStream& stream,
                  const NetParams& initial, const TrainOptions& options) {
  schedule.validate();
  cfg.validate();
  initial.validate(cfg.memory, cfg.mode);
  const ForwardModel& model = stream.model();
  const ImageGrid& grid = model.ray().grid();

  TrainResult result;
  result.theta = initial;
  RmsState rms;
  const std::vector<SamplePair> validation_set =
      stream.batch(kValidationBatch, schedule.validation_size, options.workers);

  auto record_validation = [&](int step) {
    if (validation_set.empty()) return;
    result.validation.push_back({step, supervised_loss(model, result.theta, validation_set, cfg, options.workers)});
  };
  auto checkpoint = [&](int step) {
    if (options.checkpoint_dir.empty()) return;
    save_checkpoint(options.checkpoint_dir, result.theta,
                    {grid, stream.master_seed(), static_cast<std::uint64_t>(step)});
  };

  record_validation(0);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < schedule.batches; ++t) {
    const std::vector<SamplePair> batch =
        stream.batch(static_cast<std::uint64_t>(t), schedule.batch_size, options.workers);
    const double lr = schedule.learning_rate(t);
    try {
      LossGradient lg = loss_gradient(model, result.theta, batch, cfg, options.workers);
      if (!std::isfinite(lg.loss)) throw TrainingError("loss is not finite");
      NetParams next = result.theta;
      rmsprop_step(next, lg.gradient.values, rms, lr);
      if (!next.all_finite()) throw TrainingError("parameters became non-finite");
      result.theta = std::move(next);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.push_back({t + 1, lg.loss, lr, seconds});
      if (options.metrics != nullptr) write_metrics_line(*options.metrics, result.log.back());
    } catch (const NumericalError& e) {
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(t + 1) + ": " + e.what();
      break;
    }
    result.steps_completed = t + 1;
    if (schedule.checkpoint_every > 0 && result.steps_completed % schedule.checkpoint_every == 0)
      checkpoint(result.steps_completed);
    if (schedule.validate_every > 0 && result.steps_completed % schedule.validate_every == 0 &&
        result.steps_completed != schedule.batches)
      record_validation(result.steps_completed);
  }
  if (!result.diverged) record_validation(result.steps_completed);
  checkpoint(result.steps_completed);
  return result;
}

TrainResult train(const TrainSchedule& schedule, const SolverConfig& cfg, const SampleStream& stream, Rng& rng,
                  const TrainOptions& options) {
  return train(schedule, cfg, stream, init_params(rng, cfg.architecture()), options);
}

NetParams warm_start(const std::filesystem::path& checkpoint_dir, const SolverConfig& cfg) {
  Checkpoint cp = load_checkpoint(checkpoint_dir);
  cp.theta.validate(cfg.memory, cfg.mode);
  return std::move(cp.theta);
}

}  // namespace uct
