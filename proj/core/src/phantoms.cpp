#include "uct/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uct/errors.hpp"
#include "uct/parallel.hpp"

namespace uct {

Image rasterize_ellipses(std::span<const EllipseSpec> ellipses, const ImageGrid& grid) {
  Image out(grid);
  for (const EllipseSpec& e : ellipses) {
    if (!(e.axis_a > 0.0) || !(e.axis_b > 0.0)) throw ConfigError("ellipse axes must be positive");
    const double c = std::cos(e.angle);
    const double s = std::sin(e.angle);
    const double inv_a2 = 1.0 / (e.axis_a * e.axis_a);
    const double inv_b2 = 1.0 / (e.axis_b * e.axis_b);
    for (int iy = 0; iy < grid.ny; ++iy) {
      const double y = grid.y_center(iy) / (0.5 * grid.extent_y) - e.center_y;
      for (int ix = 0; ix < grid.nx; ++ix) {
        const double x = grid.x_center(ix) / (0.5 * grid.extent_x) - e.center_x;
        const double xr = x * c + y * s;
        const double yr = -x * s + y * c;
        if (xr * xr * inv_a2 + yr * yr * inv_b2 <= 1.0) out.at(ix, iy) += e.value;
      }
    }
  }
  return out;
}

std::vector<EllipseSpec> random_ellipses(Rng& rng, const EllipseRanges& r) {
  const int count = rng.uniform_int(r.count_min, r.count_max);
  std::vector<EllipseSpec> out(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < out.size(); ++i) {
    EllipseSpec& e = out[i];
    e.value = rng.uniform(r.value_min, r.value_max);
    e.center_x = rng.uniform(-r.center_max, r.center_max);
    e.center_y = rng.uniform(-r.center_max, r.center_max);
    e.axis_a = rng.uniform(r.axis_min, r.axis_max);
    e.axis_b = rng.uniform(r.axis_min, r.axis_max);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    // The first ellipse always adds, so the phantom is never empty by construction.
    if (rng.uniform() < r.negative_probability && i > 0) e.value = -e.value;
  }
  return out;
}

Image random_ellipse_phantom(Rng& rng, const ImageGrid& grid, const EllipseRanges& ranges) {
  const auto ellipses = random_ellipses(rng, ranges);
  Image out = rasterize_ellipses(ellipses, grid);
  for (double& v : out.values) v = std::max(v, 0.0);
  return out;
}

std::vector<EllipseSpec> shepp_logan_ellipses(bool modified) {
  constexpr double deg = std::numbers::pi / 180.0;
  // value (modified), value (original), a, b, x0, y0, phi [deg]
  struct Row {
    double modified;
    double original;
    double a, b, x0, y0, phi;
  };
  static constexpr Row table[] = {
      {1.0, 2.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, -0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, -0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, -0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  std::vector<EllipseSpec> out;
  for (const Row& r : table)
    out.push_back({modified ? r.modified : r.original, r.x0, r.y0, r.a, r.b, r.phi * deg});
  return out;
}

Image shepp_logan(const ImageGrid& grid, bool modified) {
  return rasterize_ellipses(shepp_logan_ellipses(modified), grid);
}

SamplePair make_sample(const Image& f_true, const ForwardModel& model, const NoiseSpec& noise) {
  noise.validate();
  const bool linear = model.kind() == ForwardKind::linear;
  if ((linear && noise.kind == NoiseSpec::Kind::poisson) || (!linear && noise.kind == NoiseSpec::Kind::gaussian))
    throw ConfigError("noise model '" + std::string(to_string(noise.kind)) + "' does not match forward model '" +
                      std::string(to_string(model.kind())) + "'");
  SamplePair out{f_true, model.apply(f_true), model.kind(), noise};
  Rng rng(noise.seed);
  if (noise.kind == NoiseSpec::Kind::gaussian) out.g = add_gaussian_noise(out.g, noise.level, rng);
  if (noise.kind == NoiseSpec::Kind::poisson) out.g = sample_poisson(out.g, rng);
  return out;
}

SampleStream::SampleStream(std::uint64_t master_seed, ForwardModel model, NoiseSpec noise, EllipseRanges ranges)
    : master_seed_(master_seed), model_(std::move(model)), noise_(noise), ranges_(ranges) {
  noise_.validate();
}

SamplePair SampleStream::sample(std::uint64_t batch, std::uint64_t index) const {
  const std::uint64_t seed = derive_seed(master_seed_, batch, index);
  Rng phantom_rng(derive_seed(seed, 0));
  NoiseSpec noise = noise_;
  noise.seed = derive_seed(seed, 1);
  Image phantom = random_ellipse_phantom(phantom_rng, model_.ray().grid(), ranges_);
  return make_sample(phantom, model_, noise);
}

std::vector<SamplePair> SampleStream::batch(std::uint64_t batch, int size, int workers) const {
  std::vector<SamplePair> out(static_cast<std::size_t>(std::max(size, 0)));
  parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = sample(batch, i); });
  return out;
}

}  // namespace uct
