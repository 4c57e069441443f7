#include "uct/projector.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "uct/parallel.hpp"

namespace uct {

namespace {

// Angles are accumulated in fixed groups during back-projection so the
// summation order is independent of the number of workers.
constexpr int kAngleGroup = 8;

// Visits every (pixel index, weight) pair of the ray {x cos + y sin = t}.
template <class Visit>
inline void trace_ray(const ImageGrid& g, double cos_t, double sin_t, double t, Visit&& visit) {
  const int nx = g.nx;
  const int ny = g.ny;
  if (std::abs(cos_t) >= std::abs(sin_t)) {
    const double w = g.dy() / std::abs(cos_t);
    const double inv_dx = 1.0 / g.dx();
    for (int iy = 0; iy < ny; ++iy) {
      const double x = (t - g.y_center(iy) * sin_t) / cos_t;
      const double u = (x + 0.5 * g.extent_x) * inv_dx - 0.5;
      if (!(u > -1.0 && u < nx)) continue;
      const double fl = std::floor(u);
      const int i0 = static_cast<int>(fl);
      const double a = u - fl;
      const std::size_t row = static_cast<std::size_t>(iy) * nx;
      if (i0 >= 0) visit(row + i0, w * (1.0 - a));
      if (i0 + 1 < nx) visit(row + i0 + 1, w * a);
    }
  } else {
    const double w = g.dx() / std::abs(sin_t);
    const double inv_dy = 1.0 / g.dy();
    for (int ix = 0; ix < nx; ++ix) {
      const double y = (t - g.x_center(ix) * cos_t) / sin_t;
      const double v = (y + 0.5 * g.extent_y) * inv_dy - 0.5;
      if (!(v > -1.0 && v < ny)) continue;
      const double fl = std::floor(v);
      const int j0 = static_cast<int>(fl);
      const double a = v - fl;
      if (j0 >= 0) visit(static_cast<std::size_t>(j0) * nx + ix, w * (1.0 - a));
      if (j0 + 1 < ny) visit(static_cast<std::size_t>(j0 + 1) * nx + ix, w * a);
    }
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RayTransform::RayTransform(const ImageGrid& grid, const ParallelGeometry& geometry, int workers)
    : grid_(grid), geometry_(geometry), workers_(workers < 1 ? 1 : workers), counters_(std::make_shared<Counters>()) {
  if (geometry_.n_angles() < 1 || geometry_.n_detectors < 1)
    throw ConfigError("ray transform needs at least one angle and one detector");
  if (grid_.nx < 1 || grid_.ny < 1) throw ConfigError("ray transform needs a non-empty grid");
}

Sinogram RayTransform::apply(const Image& f) const {
  if (!(f.grid == grid_)) throw ShapeError("ray transform: image grid does not match the operator grid");
  counters_->forward.fetch_add(1, std::memory_order_relaxed);
  Sinogram out(geometry_);
  const int n_det = geometry_.n_detectors;
  const double* src = f.values.data();
  parallel_for(static_cast<std::size_t>(geometry_.n_angles()), workers_, [&](std::size_t k) {
    const double c = std::cos(geometry_.angles[k]);
    const double s = std::sin(geometry_.angles[k]);
    double* row = out.values.data() + k * n_det;
    for (int d = 0; d < n_det; ++d) {
      double acc = 0.0;
      trace_ray(grid_, c, s, geometry_.detector_center(d), [&](std::size_t p, double w) { acc += w * src[p]; });
      row[d] = acc;
    }
  });
  return out;
}

Image RayTransform::adjoint(const Sinogram& g) const {
  if (!(g.geometry == geometry_)) throw ShapeError("ray transform adjoint: sinogram geometry does not match");
  counters_->adjoint.fetch_add(1, std::memory_order_relaxed);
  const int n_angles = geometry_.n_angles();
  const int n_det = geometry_.n_detectors;
  const std::size_t n_groups = static_cast<std::size_t>((n_angles + kAngleGroup - 1) / kAngleGroup);
  std::vector<std::vector<double>> partial(n_groups, std::vector<double>(grid_.size(), 0.0));

  parallel_for(n_groups, workers_, [&](std::size_t group) {
    double* dst = partial[group].data();
    const int k_end = std::min(n_angles, static_cast<int>(group + 1) * kAngleGroup);
    for (int k = static_cast<int>(group) * kAngleGroup; k < k_end; ++k) {
      const double c = std::cos(geometry_.angles[k]);
      const double s = std::sin(geometry_.angles[k]);
      const double* row = g.values.data() + static_cast<std::size_t>(k) * n_det;
      for (int d = 0; d < n_det; ++d) {
        const double value = row[d];
        if (value == 0.0) continue;
        trace_ray(grid_, c, s, geometry_.detector_center(d),
                  [&](std::size_t p, double w) { dst[p] += w * value; });
      }
    }
  });

  Image out(grid_);
  const double factor = geometry_.cell_measure() / grid_.pixel_area();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double acc = 0.0;
    for (std::size_t group = 0; group < n_groups; ++group) acc += partial[group][i];
    out.values[i] = factor * acc;
  }
  return out;
}

RayTransform::CallCounts RayTransform::call_counts() const {
  return {counters_->forward.load(), counters_->adjoint.load()};
}

void RayTransform::reset_call_counts() const {
  counters_->forward.store(0);
  counters_->adjoint.store(0);
}

Sinogram ray_forward(const Image& f, const ParallelGeometry& geometry) {
  return RayTransform(f.grid, geometry).apply(f);
}

Image ray_adjoint(const Sinogram& g, const ImageGrid& grid) { return RayTransform(grid, g.geometry).adjoint(g); }

void RampFilterSpec::validate() const {
  if (window == Window::hann && !(bandwidth > 0.0 && bandwidth <= 1.0))
    throw ConfigError("Hann filter bandwidth must lie in (0, 1], got " + std::to_string(bandwidth));
}

Sinogram ramp_filter(const Sinogram& g, const RampFilterSpec& filter) {
  filter.validate();
  const int n_det = g.geometry.n_detectors;
  const double dt = g.geometry.detector_step();
  const std::size_t n = next_pow2(2 * static_cast<std::size_t>(n_det));
  const std::size_t n_freq = n / 2 + 1;

  // Spatial Ram-Lak kernel: h[0] = 1/(4 dt^2), h[odd k] = -1/(pi k dt)^2, wrapped.
  std::vector<double> kernel(n, 0.0);
  kernel[0] = 1.0 / (4.0 * dt * dt);
  for (std::size_t k = 1; k < n / 2; k += 2) {
    const double v = -1.0 / std::pow(std::numbers::pi * static_cast<double>(k) * dt, 2);
    kernel[k] = v;
    kernel[n - k] = v;
  }

  std::vector<double> buffer(n, 0.0);
  std::vector<std::complex<double>> spectrum(n_freq);
  fftw_plan forward_plan;
  fftw_plan inverse_plan;
  {
    // FFTW_UNALIGNED keeps the chosen codelets, and so the rounding, independent
    // of where the heap buffers happen to land.
    std::lock_guard lock(fftw_planner_mutex());
    forward_plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), buffer.data(),
                                        reinterpret_cast<fftw_complex*>(spectrum.data()),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(spectrum.data()),
                                        buffer.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  std::copy(kernel.begin(), kernel.end(), buffer.begin());
  fftw_execute(forward_plan);
  std::vector<double> response(n_freq);
  for (std::size_t k = 0; k < n_freq; ++k) {
    // symmetric kernel -> real response; dt turns the sum into a convolution integral
    double r = spectrum[k].real() * dt;
    if (filter.window == RampFilterSpec::Window::hann) {
      const double nu = static_cast<double>(k) / static_cast<double>(n / 2);
      r *= nu <= filter.bandwidth ? 0.5 * (1.0 + std::cos(std::numbers::pi * nu / filter.bandwidth)) : 0.0;
    }
    response[k] = r / static_cast<double>(n);
  }

  Sinogram out(g.geometry);
  for (int a = 0; a < g.geometry.n_angles(); ++a) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    auto row = g.row(a);
    std::copy(row.begin(), row.end(), buffer.begin());
    fftw_execute(forward_plan);
    for (std::size_t k = 0; k < n_freq; ++k) spectrum[k] *= response[k];
    fftw_execute(inverse_plan);
    auto dst = out.row(a);
    std::copy(buffer.begin(), buffer.begin() + n_det, dst.begin());
  }

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_plan);
    fftw_destroy_plan(inverse_plan);
  }
  return out;
}

Image backproject(const Sinogram& q, const ImageGrid& grid, int workers) {
  const ParallelGeometry& geom = q.geometry;
  const int n_angles = geom.n_angles();
  const int n_det = geom.n_detectors;
  std::vector<double> cos_t(static_cast<std::size_t>(n_angles));
  std::vector<double> sin_t(static_cast<std::size_t>(n_angles));
  for (int k = 0; k < n_angles; ++k) {
    cos_t[k] = std::cos(geom.angles[k]);
    sin_t[k] = std::sin(geom.angles[k]);
  }
  const double inv_dt = 1.0 / geom.detector_step();
  const double t0 = geom.detector_center(0);

  Image out(grid);
  parallel_for(static_cast<std::size_t>(grid.ny), workers, [&](std::size_t row) {
    const int iy = static_cast<int>(row);
    const double y = grid.y_center(iy);
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.x_center(ix);
      double acc = 0.0;
      for (int k = 0; k < n_angles; ++k) {
        const double u = (x * cos_t[k] + y * sin_t[k] - t0) * inv_dt;
        if (u < 0.0 || u > n_det - 1) continue;
        const int i0 = std::min(static_cast<int>(u), std::max(n_det - 2, 0));
        const double w = u - i0;
        const double* r = q.values.data() + static_cast<std::size_t>(k) * n_det;
        acc += n_det == 1 ? r[0] : (1.0 - w) * r[i0] + w * r[i0 + 1];
      }
      out.at(ix, iy) = geom.angle_step() * acc;
    }
  });
  return out;
}

Image fbp(const RayTransform& ray, const Sinogram& g, const RampFilterSpec& filter) {
  if (!(g.geometry == ray.geometry())) throw ShapeError("fbp: sinogram geometry does not match");
  return backproject(ramp_filter(g, filter), ray.grid(), ray.workers());
}

Image fbp(const Sinogram& g, const ImageGrid& grid, const RampFilterSpec& filter) {
  return fbp(RayTransform(grid, g.geometry), g, filter);
}

}  // namespace uct
