#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uct/noise.hpp"
#include "uct/physics.hpp"
#include "uct/rng.hpp"
#include "uct/space.hpp"

namespace uct {

/// Ellipse in normalized coordinates: the grid spans [-1, 1] on both axes.
/// `angle` rotates the a-axis counter-clockwise from the x-axis (radians).
struct EllipseSpec {
  double value = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double axis_a = 0.5;
  double axis_b = 0.5;
  double angle = 0.0;
};

/// Uniform ranges used for random ellipse phantoms.
struct EllipseRanges {
  int count_min = 1;
  int count_max = 10;
  double value_min = 0.1;
  double value_max = 1.0;
  double axis_min = 0.05;
  double axis_max = 0.6;
  double center_max = 0.7;  // |center| per coordinate
  double negative_probability = 0.5;  // chance that an ellipse after the first subtracts its value
};

/// Sum of ellipse indicators sampled at pixel centers.
Image rasterize_ellipses(std::span<const EllipseSpec> ellipses, const ImageGrid& grid);

std::vector<EllipseSpec> random_ellipses(Rng& rng, const EllipseRanges& ranges = {});

/// Sum of k ~ U{count_min..count_max} random ellipses, clamped to >= 0.
Image random_ellipse_phantom(Rng& rng, const ImageGrid& grid, const EllipseRanges& ranges = {});

/// Ten-ellipse Shepp-Logan table; `modified` selects the higher-contrast
/// intensities whose values lie in [0, 1].
std::vector<EllipseSpec> shepp_logan_ellipses(bool modified);
Image shepp_logan(const ImageGrid& grid, bool modified = true);

struct SamplePair {
  Image f_true;
  Sinogram g;
  ForwardKind forward_kind = ForwardKind::linear;
  NoiseSpec noise;
};

/// g = T(f_true) + noise. Gaussian noise pairs with the linear model and
/// Poisson with Beer-Lambert; other pairings throw ConfigError. The noise
/// stream is seeded from noise.seed.
SamplePair make_sample(const Image& f_true, const ForwardModel& model, const NoiseSpec& noise);

/// Effectively infinite on-the-fly dataset. Element (batch, index) is a pure
/// function of (master_seed, batch, index).
class SampleStream {
 public:
  SampleStream(std::uint64_t master_seed, ForwardModel model, NoiseSpec noise, EllipseRanges ranges = {});

  [[nodiscard]] SamplePair sample(std::uint64_t batch, std::uint64_t index) const;
  [[nodiscard]] std::vector<SamplePair> batch(std::uint64_t batch, int size, int workers = 1) const;

  [[nodiscard]] std::uint64_t master_seed() const { return master_seed_; }
  [[nodiscard]] const ForwardModel& model() const { return model_; }
  [[nodiscard]] const NoiseSpec& noise() const { return noise_; }

 private:
  std::uint64_t master_seed_;
  ForwardModel model_;
  NoiseSpec noise_;
  EllipseRanges ranges_;
};

}  // namespace uct
