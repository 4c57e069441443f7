#pragma once

// The learned updating operator: a three-layer network of 3x3 convolutions
// (zero padding, same-size output) with ReLU responses, and its exact
// reverse-mode derivatives.
//
// Convolutions are cross-correlations,
//   out_l(y, x) = b_l + sum_j sum_{dy,dx in {-1,0,1}} w[l][j][dy+1][dx+1] * in_j(y+dy, x+dx),
// which is the same family as true convolutions with flipped kernels.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "uct/rng.hpp"
#include "uct/space.hpp"

namespace uct {

/// Which gradient images feed the network input besides (f, s).
enum class GradientMode { both, data_only, none };

std::string_view to_string(GradientMode mode);
GradientMode parse_gradient_mode(std::string_view text);
int gradient_channel_count(GradientMode mode);

/// Channel stack on a pixel grid, planes stored one after another.
struct FeatureMap {
  int channels = 0;
  int ny = 0;
  int nx = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int channels, int ny, int nx, double fill = 0.0);

  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(ny) * nx; }
  [[nodiscard]] bool empty() const { return data.empty(); }
  [[nodiscard]] std::span<double> channel(int c) { return {data.data() + c * plane(), plane()}; }
  [[nodiscard]] std::span<const double> channel(int c) const { return {data.data() + c * plane(), plane()}; }
};

/// Network shape: N = 3 layers with channels (c0, c1, c2, c3) where
/// c0 = M + 1 + #gradient inputs and c3 = M + 1.
struct NetArchitecture {
  int memory = 5;
  int hidden = 32;
  GradientMode mode = GradientMode::both;

  [[nodiscard]] std::vector<int> channels() const;
};

/// All kernels and biases in one flat vector. Layer n occupies
///   kernels: [c_{n+1}][c_n][3][3]   then   bias: [c_{n+1}]
struct NetParams {
  std::vector<int> channels;
  std::vector<double> values;

  static constexpr int kDepth = 3;
  static constexpr int kTaps = 9;

  NetParams() = default;
  explicit NetParams(std::vector<int> channels);
  static NetParams zeros(const NetArchitecture& arch) { return NetParams(arch.channels()); }

  [[nodiscard]] int depth() const { return static_cast<int>(channels.size()) - 1; }
  [[nodiscard]] int in_channels(int layer) const { return channels[layer]; }
  [[nodiscard]] int out_channels(int layer) const { return channels[layer + 1]; }
  [[nodiscard]] int memory() const { return channels.back() - 1; }
  [[nodiscard]] GradientMode mode() const;
  [[nodiscard]] std::size_t parameter_count() const { return values.size(); }

  [[nodiscard]] std::span<double> kernels(int layer);
  [[nodiscard]] std::span<const double> kernels(int layer) const;
  [[nodiscard]] std::span<double> bias(int layer);
  [[nodiscard]] std::span<const double> bias(int layer) const;

  /// Throws ConfigError unless depth == 3, c_N == M + 1 and c_0 == M + 1 + gradients(mode).
  void validate(int memory, GradientMode mode) const;
  void validate() const;
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const NetParams&, const NetParams&) = default;

 private:
  [[nodiscard]] std::size_t layer_offset(int layer) const;
};

/// Arithmetic used inside the convolutions. Inputs, outputs and parameters
/// stay double; f32 only rounds the matrix products.
enum class Precision { f64, f32 };

std::string_view to_string(Precision precision);
Precision parse_precision(std::string_view text);

/// 3x3 same-size convolution of a c_in stack with a [c_out][c_in][3][3] kernel stack.
FeatureMap conv2d(const FeatureMap& x, std::span<const double> kernels, std::span<const double> bias,
                  Precision precision = Precision::f64);

/// Reverse mode of conv2d for cotangent dy. Kernel and bias gradients are
/// accumulated into dkernels / dbias; dx is skipped when null.
void conv2d_vjp(const FeatureMap& x, std::span<const double> kernels, const FeatureMap& dy, FeatureMap* dx,
                std::span<double> dkernels, std::span<double> dbias, Precision precision = Precision::f64);

FeatureMap relu(const FeatureMap& x);
void relu_in_place(FeatureMap& x);

/// Activations kept from one application of the updating operator.
struct UpdateActivations {
  FeatureMap input;    // u1 = (f, s, [grad data], [grad reg])
  FeatureMap hidden1;  // u2 = relu(A1 u1)
  FeatureMap hidden2;  // u3 = relu(A2 u2)
  FeatureMap memory;   // s_new = relu(u4)

  [[nodiscard]] bool complete() const {
    return !input.empty() && !hidden1.empty() && !hidden2.empty() && memory.ny > 0;
  }
};

struct UpdateResult {
  FeatureMap memory;           // s_new, M channels
  std::vector<double> delta;   // image increment
  UpdateActivations saved;
};

/// (s_new, delta) = Lambda_theta(s, f, grad_data, grad_reg). Unused gradient
/// inputs (by the parameter's mode) must be empty spans.
UpdateResult updating_operator(const NetParams& theta, const FeatureMap& memory, std::span<const double> f,
                               std::span<const double> grad_data, std::span<const double> grad_reg,
                               Precision precision = Precision::f64);

struct UpdateCotangents {
  FeatureMap memory;
  std::vector<double> f;
  std::vector<double> grad_data;  // empty when the mode has no data gradient
  std::vector<double> grad_reg;   // empty when the mode has no regularizer gradient
};

/// Pulls cotangents on (s_new, delta) back through Lambda_theta. The theta
/// gradient is accumulated into `theta_grad`. Throws UsageError when the saved
/// activations are missing or do not fit theta.
UpdateCotangents vjp_updating_operator(const NetParams& theta, const UpdateActivations& saved,
                                       const FeatureMap& memory_cotangent, std::span<const double> delta_cotangent,
                                       NetParams& theta_grad, Precision precision = Precision::f64);

enum class InitScheme { he_uniform, xavier_uniform };

/// Fan-in scaled uniform kernels (He: variance 2 / (9 c_in)) and zero biases.
/// The last layer's kernels are multiplied by `output_scale`; 0 makes the
/// untrained solver return its initial guess.
NetParams init_params(Rng& rng, const NetArchitecture& arch, InitScheme scheme = InitScheme::he_uniform,
                      double output_scale = 1.0);

struct RmsState {
  double decay = 0.9;
  double epsilon = 1e-10;
  std::vector<double> accumulator;
};

/// acc <- decay * acc + (1 - decay) * grad^2;  theta <- theta - lr * grad / sqrt(acc + eps).
/// Throws TrainingError naming the first non-finite gradient entry.
void rmsprop_step(NetParams& theta, std::span<const double> grad, RmsState& state, double learning_rate);

}  // namespace uct
