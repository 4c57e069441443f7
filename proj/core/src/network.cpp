#include "uct/network.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "uct/errors.hpp"

namespace uct {

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row (j, ky, kx) of the patch matrix holds channel j shifted by (ky - 1, kx - 1).
template <class T>
void im2col(const FeatureMap& x, RowMatrix<T>& cols) {
  const int ny = x.ny;
  const int nx = x.nx;
  const std::size_t plane = x.plane();
  cols.resize(static_cast<Eigen::Index>(x.channels) * NetParams::kTaps, static_cast<Eigen::Index>(plane));
  for (int j = 0; j < x.channels; ++j) {
    const double* src = x.data.data() + j * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols.data() + (static_cast<std::size_t>(j) * NetParams::kTaps + ky * 3 + kx) * plane;
        const int oy = ky - 1;
        const int ox = kx - 1;
        const int x_begin = std::max(0, -ox);
        const int x_end = std::min(nx, nx - ox);
        for (int y = 0; y < ny; ++y) {
          const int sy = y + oy;
          T* d = dst + static_cast<std::size_t>(y) * nx;
          if (sy < 0 || sy >= ny) {
            std::fill(d, d + nx, T(0));
            continue;
          }
          const double* s = src + static_cast<std::size_t>(sy) * nx + ox;
          for (int xx = 0; xx < x_begin; ++xx) d[xx] = T(0);
          for (int xx = x_begin; xx < x_end; ++xx) d[xx] = static_cast<T>(s[xx]);
          for (int xx = x_end; xx < nx; ++xx) d[xx] = T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch rows back to their source pixels.
template <class T>
void col2im(const RowMatrix<T>& cols, FeatureMap& x) {
  const int ny = x.ny;
  const int nx = x.nx;
  const std::size_t plane = x.plane();
  std::fill(x.data.begin(), x.data.end(), 0.0);
  for (int j = 0; j < x.channels; ++j) {
    double* dst = x.data.data() + j * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols.data() + (static_cast<std::size_t>(j) * NetParams::kTaps + ky * 3 + kx) * plane;
        const int oy = ky - 1;
        const int ox = kx - 1;
        const int x_begin = std::max(0, -ox);
        const int x_end = std::min(nx, nx - ox);
        for (int y = 0; y < ny; ++y) {
          const int sy = y + oy;
          if (sy < 0 || sy >= ny) continue;
          double* d = dst + static_cast<std::size_t>(sy) * nx + ox;
          const T* s = src + static_cast<std::size_t>(y) * nx;
          for (int xx = x_begin; xx < x_end; ++xx) d[xx] += static_cast<double>(s[xx]);
        }
      }
    }
  }
}

// Per-thread matrices, reused across calls to avoid reallocating large blocks.
// Every product reads and writes Eigen-allocated storage only: Eigen picks its
// vectorized code path from the operand addresses, so products over arbitrary
// heap buffers could round differently from one call to the next.
template <class T>
struct Scratch {
  RowMatrix<T> cols;     // patch matrix, k x plane
  RowMatrix<T> weights;  // c_out x k
  RowMatrix<T> signal;   // c_out x plane (output or its cotangent)
  RowMatrix<T> product;  // c_out x k kernel gradient
};

template <class T>
Scratch<T>& scratch() {
  thread_local Scratch<T> buffers;
  return buffers;
}

template <class T>
void load(RowMatrix<T>& dst, const double* src, Eigen::Index rows, Eigen::Index cols) {
  dst.resize(rows, cols);
  std::transform(src, src + rows * cols, dst.data(), [](double v) { return static_cast<T>(v); });
}

void check_conv_shapes(const FeatureMap& x, std::span<const double> kernels, std::size_t c_out) {
  if (x.channels < 1 || x.plane() == 0) throw ShapeError("conv2d: empty input");
  if (x.data.size() != static_cast<std::size_t>(x.channels) * x.plane())
    throw ShapeError("conv2d: input storage does not match its shape");
  if (kernels.size() != c_out * static_cast<std::size_t>(x.channels) * NetParams::kTaps)
    throw ShapeError("conv2d: kernel stack has " + std::to_string(kernels.size()) + " entries, expected " +
                     std::to_string(c_out * x.channels * NetParams::kTaps));
}

template <class T>
FeatureMap conv_forward(const FeatureMap& x, std::span<const double> kernels, std::span<const double> bias) {
  const std::size_t c_out = bias.size();
  Scratch<T>& s = scratch<T>();
  im2col(x, s.cols);
  const auto k = static_cast<Eigen::Index>(x.channels) * NetParams::kTaps;
  const auto rows = static_cast<Eigen::Index>(c_out);
  load(s.weights, kernels.data(), rows, k);
  s.signal.resize(rows, s.cols.cols());
  s.signal.noalias() = s.weights * s.cols;
  FeatureMap out(static_cast<int>(c_out), x.ny, x.nx);
  const std::size_t plane = x.plane();
  for (std::size_t l = 0; l < c_out; ++l) {
    const T* src = s.signal.data() + l * plane;
    double* dst = out.data.data() + l * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<double>(src[p]) + bias[l];
  }
  return out;
}

template <class T>
void conv_backward(const FeatureMap& x, std::span<const double> kernels, const FeatureMap& dy, FeatureMap* dx,
                   std::span<double> dkernels, std::span<double> dbias) {
  const std::size_t c_out = dbias.size();
  const std::size_t plane = x.plane();
  for (std::size_t l = 0; l < c_out; ++l) {
    double sum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) sum += dy.data[l * plane + p];
    dbias[l] += sum;
  }

  Scratch<T>& s = scratch<T>();
  im2col(x, s.cols);
  const auto k = static_cast<Eigen::Index>(x.channels) * NetParams::kTaps;
  const auto rows = static_cast<Eigen::Index>(c_out);
  load(s.signal, dy.data.data(), rows, static_cast<Eigen::Index>(plane));
  s.product.resize(rows, k);
  s.product.noalias() = s.signal * s.cols.transpose();
  for (std::size_t i = 0; i < dkernels.size(); ++i) dkernels[i] += static_cast<double>(s.product.data()[i]);
  if (dx != nullptr) {
    load(s.weights, kernels.data(), rows, k);
    s.cols.noalias() = s.weights.transpose() * s.signal;
    *dx = FeatureMap(x.channels, x.ny, x.nx);
    col2im(s.cols, *dx);
  }
}

}  // namespace

std::string_view to_string(GradientMode mode) {
  switch (mode) {
    case GradientMode::both: return "both";
    case GradientMode::data_only: return "data_only";
    case GradientMode::none: return "none";
  }
  return "both";
}

GradientMode parse_gradient_mode(std::string_view text) {
  if (text == "both") return GradientMode::both;
  if (text == "data_only") return GradientMode::data_only;
  if (text == "none") return GradientMode::none;
  throw ConfigError("unknown gradient mode '" + std::string(text) + "' (expected both | data_only | none)");
}

std::string_view to_string(Precision precision) { return precision == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
  if (text == "f64" || text == "double") return Precision::f64;
  if (text == "f32" || text == "float") return Precision::f32;
  throw ConfigError("unknown precision '" + std::string(text) + "' (expected f64 | f32)");
}

int gradient_channel_count(GradientMode mode) {
  switch (mode) {
    case GradientMode::both: return 2;
    case GradientMode::data_only: return 1;
    case GradientMode::none: return 0;
  }
  return 0;
}

FeatureMap::FeatureMap(int c, int y, int x, double fill)
    : channels(c), ny(y), nx(x), data(static_cast<std::size_t>(c) * y * x, fill) {}

std::vector<int> NetArchitecture::channels() const {
  if (memory < 0) throw ConfigError("memory size must be >= 0");
  if (hidden < 1) throw ConfigError("hidden channel count must be >= 1");
  return {memory + 1 + gradient_channel_count(mode), hidden, hidden, memory + 1};
}

NetParams::NetParams(std::vector<int> ch) : channels(std::move(ch)) {
  if (channels.size() < 2) throw ConfigError("network needs at least one layer");
  for (int c : channels)
    if (c < 1) throw ConfigError("channel counts must be positive");
  values.assign(layer_offset(depth()), 0.0);
}

std::size_t NetParams::layer_offset(int layer) const {
  std::size_t offset = 0;
  for (int n = 0; n < layer; ++n)
    offset += static_cast<std::size_t>(channels[n + 1]) * (static_cast<std::size_t>(channels[n]) * kTaps + 1);
  return offset;
}

std::span<double> NetParams::kernels(int layer) {
  return {values.data() + layer_offset(layer),
          static_cast<std::size_t>(out_channels(layer)) * in_channels(layer) * kTaps};
}

std::span<const double> NetParams::kernels(int layer) const {
  return {values.data() + layer_offset(layer),
          static_cast<std::size_t>(out_channels(layer)) * in_channels(layer) * kTaps};
}

std::span<double> NetParams::bias(int layer) {
  return {values.data() + layer_offset(layer) + static_cast<std::size_t>(out_channels(layer)) * in_channels(layer) * kTaps,
          static_cast<std::size_t>(out_channels(layer))};
}

std::span<const double> NetParams::bias(int layer) const {
  return {values.data() + layer_offset(layer) + static_cast<std::size_t>(out_channels(layer)) * in_channels(layer) * kTaps,
          static_cast<std::size_t>(out_channels(layer))};
}

GradientMode NetParams::mode() const {
  switch (channels.front() - channels.back()) {
    case 0: return GradientMode::none;
    case 1: return GradientMode::data_only;
    case 2: return GradientMode::both;
    default: throw ConfigError("input/output channel counts do not correspond to any gradient mode");
  }
}

void NetParams::validate(int memory_size, GradientMode mode_) const {
  if (depth() != kDepth)
    throw ConfigError("updating operator must have " + std::to_string(kDepth) + " layers, got " +
                      std::to_string(depth()));
  if (channels.back() != memory_size + 1)
    throw ConfigError("output channels " + std::to_string(channels.back()) + " != M + 1 = " +
                      std::to_string(memory_size + 1));
  const int expected_in = memory_size + 1 + gradient_channel_count(mode_);
  if (channels.front() != expected_in)
    throw ConfigError("input channels " + std::to_string(channels.front()) + " != " + std::to_string(expected_in) +
                      " required by memory " + std::to_string(memory_size) + " and gradient mode " +
                      std::string(to_string(mode_)));
  if (values.size() != layer_offset(depth())) throw ConfigError("parameter vector has the wrong length");
}

void NetParams::validate() const { validate(memory(), mode()); }

bool NetParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

FeatureMap conv2d(const FeatureMap& x, std::span<const double> kernels, std::span<const double> bias,
                  Precision precision) {
  check_conv_shapes(x, kernels, bias.size());
  return precision == Precision::f32 ? conv_forward<float>(x, kernels, bias) : conv_forward<double>(x, kernels, bias);
}

void conv2d_vjp(const FeatureMap& x, std::span<const double> kernels, const FeatureMap& dy, FeatureMap* dx,
                std::span<double> dkernels, std::span<double> dbias, Precision precision) {
  check_conv_shapes(x, kernels, dbias.size());
  if (dy.channels != static_cast<int>(dbias.size()) || dy.ny != x.ny || dy.nx != x.nx)
    throw ShapeError("conv2d_vjp: cotangent shape does not match the layer output");
  if (dkernels.size() != kernels.size()) throw ShapeError("conv2d_vjp: kernel gradient has the wrong size");
  if (precision == Precision::f32) {
    conv_backward<float>(x, kernels, dy, dx, dkernels, dbias);
  } else {
    conv_backward<double>(x, kernels, dy, dx, dkernels, dbias);
  }
}

FeatureMap relu(const FeatureMap& x) {
  FeatureMap out = x;
  relu_in_place(out);
  return out;
}

void relu_in_place(FeatureMap& x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
}

namespace {

// Zero the cotangent where the forward activation was clipped (subgradient 0 at 0).
void relu_gate(FeatureMap& cotangent, const FeatureMap& activation) {
  for (std::size_t i = 0; i < cotangent.data.size(); ++i)
    if (!(activation.data[i] > 0.0)) cotangent.data[i] = 0.0;
}

}  // namespace

UpdateResult updating_operator(const NetParams& theta, const FeatureMap& memory, std::span<const double> f,
                               std::span<const double> grad_data, std::span<const double> grad_reg,
                               Precision precision) {
  const int m = theta.memory();
  const GradientMode mode = theta.mode();
  theta.validate(m, mode);
  if (memory.channels != m) throw ConfigError("memory has " + std::to_string(memory.channels) + " channels, theta expects " + std::to_string(m));
  const std::size_t plane = memory.plane();
  if (f.size() != plane) throw ShapeError("updating operator: image does not match the memory grid");
  const bool want_data = mode != GradientMode::none;
  const bool want_reg = mode == GradientMode::both;
  if (want_data != !grad_data.empty() || want_reg != !grad_reg.empty())
    throw ConfigError("gradient inputs do not match gradient mode '" + std::string(to_string(mode)) + "'");
  if ((want_data && grad_data.size() != plane) || (want_reg && grad_reg.size() != plane))
    throw ShapeError("updating operator: gradient image does not match the memory grid");

  UpdateResult out;
  FeatureMap& u1 = out.saved.input;
  u1 = FeatureMap(theta.in_channels(0), memory.ny, memory.nx);
  std::copy(f.begin(), f.end(), u1.channel(0).begin());
  std::copy(memory.data.begin(), memory.data.end(), u1.channel(1).begin());
  int next = 1 + m;
  if (want_data) std::copy(grad_data.begin(), grad_data.end(), u1.channel(next++).begin());
  if (want_reg) std::copy(grad_reg.begin(), grad_reg.end(), u1.channel(next++).begin());

  out.saved.hidden1 = conv2d(u1, theta.kernels(0), theta.bias(0), precision);
  relu_in_place(out.saved.hidden1);
  out.saved.hidden2 = conv2d(out.saved.hidden1, theta.kernels(1), theta.bias(1), precision);
  relu_in_place(out.saved.hidden2);
  FeatureMap last = conv2d(out.saved.hidden2, theta.kernels(2), theta.bias(2), precision);

  out.memory = FeatureMap(m, memory.ny, memory.nx);
  std::copy(last.data.begin(), last.data.begin() + static_cast<std::ptrdiff_t>(m * plane), out.memory.data.begin());
  relu_in_place(out.memory);
  out.delta.assign(last.data.begin() + static_cast<std::ptrdiff_t>(m * plane), last.data.end());
  out.saved.memory = out.memory;
  return out;
}

UpdateCotangents vjp_updating_operator(const NetParams& theta, const UpdateActivations& saved,
                                       const FeatureMap& memory_cotangent, std::span<const double> delta_cotangent,
                                       NetParams& theta_grad, Precision precision) {
  if (!saved.complete()) throw UsageError("vjp_updating_operator: forward activations are missing");
  const int m = theta.memory();
  const GradientMode mode = theta.mode();
  const int ny = saved.input.ny;
  const int nx = saved.input.nx;
  const std::size_t plane = saved.input.plane();
  if (saved.input.channels != theta.in_channels(0) || saved.hidden1.channels != theta.out_channels(0) ||
      saved.hidden2.channels != theta.out_channels(1) || saved.memory.channels != m)
    throw UsageError("vjp_updating_operator: saved activations do not belong to these parameters");
  if (theta_grad.channels != theta.channels) throw ShapeError("theta gradient has a different architecture");
  if (memory_cotangent.channels != m || memory_cotangent.plane() != plane || delta_cotangent.size() != plane)
    throw ShapeError("vjp_updating_operator: cotangent shapes do not match");

  // Cotangent of the last affine layer output: gated memory channels, then delta.
  FeatureMap d_last(m + 1, ny, nx);
  std::copy(memory_cotangent.data.begin(), memory_cotangent.data.end(), d_last.data.begin());
  for (std::size_t i = 0; i < static_cast<std::size_t>(m) * plane; ++i)
    if (!(saved.memory.data[i] > 0.0)) d_last.data[i] = 0.0;
  std::copy(delta_cotangent.begin(), delta_cotangent.end(), d_last.channel(m).begin());

  FeatureMap d_hidden2;
  conv2d_vjp(saved.hidden2, theta.kernels(2), d_last, &d_hidden2, theta_grad.kernels(2), theta_grad.bias(2), precision);
  relu_gate(d_hidden2, saved.hidden2);
  FeatureMap d_hidden1;
  conv2d_vjp(saved.hidden1, theta.kernels(1), d_hidden2, &d_hidden1, theta_grad.kernels(1), theta_grad.bias(1), precision);
  relu_gate(d_hidden1, saved.hidden1);
  FeatureMap d_input;
  conv2d_vjp(saved.input, theta.kernels(0), d_hidden1, &d_input, theta_grad.kernels(0), theta_grad.bias(0), precision);

  UpdateCotangents out;
  auto f_part = d_input.channel(0);
  out.f.assign(f_part.begin(), f_part.end());
  out.memory = FeatureMap(m, ny, nx);
  std::copy(d_input.data.begin() + static_cast<std::ptrdiff_t>(plane),
            d_input.data.begin() + static_cast<std::ptrdiff_t>((1 + m) * plane), out.memory.data.begin());
  int next = 1 + m;
  if (mode != GradientMode::none) {
    auto c = d_input.channel(next++);
    out.grad_data.assign(c.begin(), c.end());
  }
  if (mode == GradientMode::both) {
    auto c = d_input.channel(next++);
    out.grad_reg.assign(c.begin(), c.end());
  }
  return out;
}

NetParams init_params(Rng& rng, const NetArchitecture& arch, InitScheme scheme, double output_scale) {
  NetParams theta = NetParams::zeros(arch);
  for (int n = 0; n < theta.depth(); ++n) {
    const double fan_in = static_cast<double>(theta.in_channels(n)) * NetParams::kTaps;
    const double fan_out = static_cast<double>(theta.out_channels(n)) * NetParams::kTaps;
    const double limit =
        scheme == InitScheme::he_uniform ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    const double gain = n + 1 == theta.depth() ? output_scale : 1.0;
    for (double& w : theta.kernels(n)) w = gain * rng.uniform(-limit, limit);
  }
  return theta;
}

void rmsprop_step(NetParams& theta, std::span<const double> grad, RmsState& state, double learning_rate) {
  if (grad.size() != theta.values.size())
    throw ShapeError("rmsprop: gradient has " + std::to_string(grad.size()) + " entries, parameters have " +
                     std::to_string(theta.values.size()));
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw TrainingError("rmsprop: non-finite gradient entry " + std::to_string(i) + " (" +
                          std::to_string(grad[i]) + ")");
  if (state.accumulator.size() != grad.size()) state.accumulator.assign(grad.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& acc = state.accumulator[i];
    acc = state.decay * acc + (1.0 - state.decay) * grad[i] * grad[i];
    theta.values[i] -= learning_rate * grad[i] / std::sqrt(acc + state.epsilon);
  }
}

}  // namespace uct
