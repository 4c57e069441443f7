#pragma once

// Partially learned gradient descent: a fixed number of iterations
//   (s_i, df_i) = Lambda_theta(s_{i-1}, f_{i-1}, grad data(f_{i-1}), grad reg(f_{i-1}))
//   f_i = f_{i-1} + df_i
// started from f_0 = FBP(g), s_0 = 0, with training by back-propagation
// through every iterate, including the operator-dependent gradient inputs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uct/network.hpp"
#include "uct/phantoms.hpp"
#include "uct/physics.hpp"

namespace uct {

enum class InitKind { fbp, zero };

std::string_view to_string(InitKind kind);
InitKind parse_init_kind(std::string_view text);

struct SolverConfig {
  int iterations = 10;
  int memory = 5;
  GradientMode mode = GradientMode::both;
  InitKind init = InitKind::fbp;
  Precision precision = Precision::f64;
  /// Constant factors applied to the gradient images before they enter the
  /// network (see normalized_gradient_scales).
  double data_scale = 1.0;
  double reg_scale = 1.0;

  void validate() const;
  [[nodiscard]] NetArchitecture architecture(int hidden = 32) const { return {memory, hidden, mode}; }
};

struct GradientScales {
  double data = 1.0;
  double reg = 1.0;
};

/// Inverse norms of the Jacobians of the two gradient maps at f = 0, so the
/// scaled gradients are steps of the size a stable gradient descent would take.
GradientScales normalized_gradient_scales(const ForwardModel& model, int power_iterations = 50);

/// f_0: ramp-filtered FBP (no apodization) or zero.
Image initial_guess(const ForwardModel& model, const Sinogram& g, const SolverConfig& cfg);

/// Runs the unrolled scheme. When `trace` is given it receives f_0 ... f_I.
/// Throws NumericalError naming the first non-finite iterate.
Image reconstruct(const ForwardModel& model, const Sinogram& g, const NetParams& theta, const SolverConfig& cfg,
                  std::vector<Image>* trace = nullptr);

/// Mean over the batch of ||reconstruct(g) - f_true||^2.
double supervised_loss(const ForwardModel& model, const NetParams& theta, std::span<const SamplePair> batch,
                       const SolverConfig& cfg, int workers = 1);

struct LossGradient {
  double loss = 0.0;
  NetParams gradient;  // derivative with respect to the entries of theta.values
};

/// Loss and its exact gradient. Per-sample passes may run on `workers`
/// threads; their gradients are summed in sample order.
LossGradient loss_gradient(const ForwardModel& model, const NetParams& theta, std::span<const SamplePair> batch,
                           const SolverConfig& cfg, int workers = 1);

struct TrainSchedule {
  int batches = 2000;
  int batch_size = 4;
  double lr_start = 1.0e-3;
  double lr_end = 3.4e-4;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  int validate_every = 0;    // 0 validates only before and after training
  int validation_size = 8;

  void validate() const;
  /// lr_t = lr_start / (1 + t (lr_start / lr_end - 1) / (T - 1)) for t = 0 .. T-1.
  [[nodiscard]] double learning_rate(int step) const;
};

/// Validation samples come from this batch index of the training stream, far
/// away from the indices used for training.
inline constexpr std::uint64_t kValidationBatch = std::uint64_t{1} << 62;

struct TrainStepRecord {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct ValidationRecord {
  int step = 0;
  double loss = 0.0;
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::ostream* metrics = nullptr;       // JSON lines {step, loss, lr, seconds}
  int workers = 1;
};

struct TrainResult {
  NetParams theta;
  int steps_completed = 0;
  std::vector<TrainStepRecord> log;
  std::vector<ValidationRecord> validation;
  bool diverged = false;
  std::string diagnostic;
};

/// RMSProp over batches 0 .. T-1 of `stream`. On a non-finite loss or gradient
/// the loop stops and returns the last finite parameters with diverged = true
/// (also saved as the checkpoint when a directory is configured).
TrainResult train(const TrainSchedule& schedule, const SolverConfig& cfg, const SampleStream& stream,
                  const NetParams& initial, const TrainOptions& options = {});

/// He-initialized parameters drawn from `rng`, then train().
TrainResult train(const TrainSchedule& schedule, const SolverConfig& cfg, const SampleStream& stream, Rng& rng,
                  const TrainOptions& options = {});

/// Loads a checkpoint as the starting point for another experiment. Throws
/// ConfigError if its channel layout does not match `cfg`.
NetParams warm_start(const std::filesystem::path& checkpoint_dir, const SolverConfig& cfg);

}  // namespace uct
