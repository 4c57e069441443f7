#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>

#include "uct/errors.hpp"
#include "uct/operator.hpp"
#include "uct/rng.hpp"
#include "uct/space.hpp"

namespace uct {

/// Parallel-beam ray transform with a Joseph-type discretization: every ray is
/// driven along its dominant axis and the image is sampled by linear
/// interpolation at the crossing of each pixel row (or column). The adjoint is
/// the exact transpose of the same stencil, rescaled for the weighted inner
/// products, so <Pf, g>_Y == <f, P*g>_X up to rounding.
///
/// Ray (angle theta, detector t) is the line {x cos(theta) + y sin(theta) = t}.
/// apply() and adjoint() may split the work over angles; results do not depend
/// on the worker count.
class RayTransform {
 public:
  using domain_type = Image;
  using range_type = Sinogram;

  struct CallCounts {
    std::uint64_t forward = 0;
    std::uint64_t adjoint = 0;
  };

  RayTransform(const ImageGrid& grid, const ParallelGeometry& geometry, int workers = 1);

  [[nodiscard]] Sinogram apply(const Image& f) const;
  [[nodiscard]] Image adjoint(const Sinogram& g) const;

  [[nodiscard]] const ImageGrid& grid() const { return grid_; }
  [[nodiscard]] const ParallelGeometry& geometry() const { return geometry_; }
  [[nodiscard]] int workers() const { return workers_; }
  void set_workers(int workers) { workers_ = workers < 1 ? 1 : workers; }

  /// Number of apply()/adjoint() calls made through this object and its copies.
  [[nodiscard]] CallCounts call_counts() const;
  void reset_call_counts() const;

 private:
  struct Counters {
    std::atomic<std::uint64_t> forward{0};
    std::atomic<std::uint64_t> adjoint{0};
  };

  ImageGrid grid_;
  ParallelGeometry geometry_;
  int workers_ = 1;
  std::shared_ptr<Counters> counters_;
};

Sinogram ray_forward(const Image& f, const ParallelGeometry& geometry);
Image ray_adjoint(const Sinogram& g, const ImageGrid& grid);

struct RampFilterSpec {
  enum class Window { none, hann };

  Window window = Window::none;
  /// Fraction of the Nyquist frequency where the Hann window reaches zero.
  double bandwidth = 1.0;

  static RampFilterSpec ramp() { return {}; }
  static RampFilterSpec hann(double bandwidth) { return {Window::hann, bandwidth}; }
  void validate() const;
};

/// Ram-Lak filtering of every projection, optionally apodized with a Hann
/// window. Uses an FFT of length next_pow2(2 * n_detectors) so the linear
/// convolution does not wrap around.
Sinogram ramp_filter(const Sinogram& g, const RampFilterSpec& filter);

/// Pixel-driven back-projection: every pixel center is projected onto each
/// detector row and the row is sampled by linear interpolation, zero outside
/// the detector. Scaled by the angle step so that it inverts ramp_filter on
/// dense data. Not the algebraic adjoint; use RayTransform::adjoint for that.
Image backproject(const Sinogram& q, const ImageGrid& grid, int workers = 1);

/// Filtered back-projection: ramp_filter followed by backproject().
Image fbp(const RayTransform& ray, const Sinogram& g, const RampFilterSpec& filter = RampFilterSpec::ramp());
Image fbp(const Sinogram& g, const ImageGrid& grid, const RampFilterSpec& filter = RampFilterSpec::ramp());

/// Power iteration on op^* op started from a seeded Gaussian element shaped
/// like `prototype`. The returned estimate ||op x_k|| / ||x_k|| is
/// nondecreasing in `iterations`.
template <LinearOperator Op>
double power_method_norm(const Op& op, const typename Op::domain_type& prototype, int iterations,
                         std::uint64_t seed) {
  if (iterations < 10) throw ConfigError("power method needs at least 10 iterations");
  auto x = prototype;
  Rng rng(seed);
  for (double& v : x.values) v = rng.normal();
  double norm = std::sqrt(l2_norm_sq(x));
  if (!(norm > 0.0)) return 0.0;
  scale(x, 1.0 / norm);

  double estimate = 0.0;
  for (int k = 0; k < iterations; ++k) {
    auto y = op.apply(x);
    estimate = std::sqrt(l2_norm_sq(y));
    x = op.adjoint(y);
    norm = std::sqrt(l2_norm_sq(x));
    if (!(norm > 0.0)) break;
    scale(x, 1.0 / norm);
  }
  return estimate;
}

}  // namespace uct
