#pragma once

// Discretized image and data spaces.
//
// Layout convention, used everywhere in the library:
//   Image     values[iy * nx + ix]            (row-major, y then x)
//   Sinogram  values[angle * n_detectors + d] (row-major, angle then detector)
// Pixel (ix, iy) has its center at
//   x = -extent_x / 2 + (ix + 0.5) * dx,  y = -extent_y / 2 + (iy + 0.5) * dy.
// Inner products are weighted by the cell measure (pixel area for images,
// angle step times detector step for sinograms) so that discrete adjoints
// approximate the continuum adjoints.

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace uct {

struct ImageGrid {
  int nx = 1;
  int ny = 1;
  double extent_x = 1.0;
  double extent_y = 1.0;

  ImageGrid() = default;
  ImageGrid(int nx, int ny, double extent_x, double extent_y);
  /// Square grid with unit pixel size.
  static ImageGrid square(int n);
  static ImageGrid square(int n, double extent);

  [[nodiscard]] double dx() const { return extent_x / nx; }
  [[nodiscard]] double dy() const { return extent_y / ny; }
  [[nodiscard]] double pixel_area() const { return dx() * dy(); }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  [[nodiscard]] double x_center(int ix) const { return -0.5 * extent_x + (ix + 0.5) * dx(); }
  [[nodiscard]] double y_center(int iy) const { return -0.5 * extent_y + (iy + 0.5) * dy(); }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Parallel-beam sampling of the line manifold. Angles are uniform in [0, pi).
struct ParallelGeometry {
  std::vector<double> angles;
  int n_detectors = 1;
  double detector_extent = 1.0;

  ParallelGeometry() = default;
  ParallelGeometry(int n_angles, int n_detectors, double detector_extent);
  /// Detector sized to cover the grid diagonal with spacing equal to the pixel
  /// size divided by `oversampling`.
  static ParallelGeometry covering(const ImageGrid& grid, int n_angles, int oversampling = 1);

  [[nodiscard]] int n_angles() const { return static_cast<int>(angles.size()); }
  [[nodiscard]] double angle_step() const;
  [[nodiscard]] double detector_step() const { return detector_extent / n_detectors; }
  [[nodiscard]] double detector_center(int d) const {
    return -0.5 * detector_extent + (d + 0.5) * detector_step();
  }
  [[nodiscard]] double cell_measure() const { return angle_step() * detector_step(); }
  [[nodiscard]] std::size_t size() const {
    return angles.size() * static_cast<std::size_t>(n_detectors);
  }

  friend bool operator==(const ParallelGeometry&, const ParallelGeometry&) = default;
};

struct Image {
  ImageGrid grid;
  std::vector<double> values;

  Image() = default;
  explicit Image(const ImageGrid& grid, double fill = 0.0);
  Image(const ImageGrid& grid, std::vector<double> values);

  [[nodiscard]] double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }
  [[nodiscard]] double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }
  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double cell_measure() const { return grid.pixel_area(); }
  [[nodiscard]] bool all_finite() const;
};

struct Sinogram {
  ParallelGeometry geometry;
  std::vector<double> values;

  Sinogram() = default;
  explicit Sinogram(const ParallelGeometry& geometry, double fill = 0.0);
  Sinogram(const ParallelGeometry& geometry, std::vector<double> values);

  [[nodiscard]] double& at(int angle, int detector) {
    return values[static_cast<std::size_t>(angle) * geometry.n_detectors + detector];
  }
  [[nodiscard]] double at(int angle, int detector) const {
    return values[static_cast<std::size_t>(angle) * geometry.n_detectors + detector];
  }
  [[nodiscard]] std::span<double> row(int angle) {
    return {values.data() + static_cast<std::size_t>(angle) * geometry.n_detectors,
            static_cast<std::size_t>(geometry.n_detectors)};
  }
  [[nodiscard]] std::span<const double> row(int angle) const {
    return {values.data() + static_cast<std::size_t>(angle) * geometry.n_detectors,
            static_cast<std::size_t>(geometry.n_detectors)};
  }
  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double cell_measure() const { return geometry.cell_measure(); }
  [[nodiscard]] bool all_finite() const;
};

/// Two-channel image (gradient field) on an image grid; channel c at values[c * size + i].
struct VectorField {
  ImageGrid grid;
  std::vector<double> values;

  VectorField() = default;
  explicit VectorField(const ImageGrid& grid, double fill = 0.0);

  [[nodiscard]] std::span<double> component(int c) {
    return {values.data() + static_cast<std::size_t>(c) * grid.size(), grid.size()};
  }
  [[nodiscard]] std::span<const double> component(int c) const {
    return {values.data() + static_cast<std::size_t>(c) * grid.size(), grid.size()};
  }
  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double cell_measure() const { return grid.pixel_area(); }
};

void require_same_space(const Image& a, const Image& b);
void require_same_space(const Sinogram& a, const Sinogram& b);
void require_same_space(const VectorField& a, const VectorField& b);

double inner_product(const Image& a, const Image& b);
double inner_product(const Sinogram& a, const Sinogram& b);
double inner_product(const VectorField& a, const VectorField& b);

double l2_norm_sq(const Image& a);
double l2_norm_sq(const Sinogram& a);
double l2_norm_sq(const VectorField& a);

// Vector-space arithmetic shared by every element type.
template <class E>
concept SpaceElement = requires(E e) {
  e.values;
  { e.cell_measure() } -> std::convertible_to<double>;
};

/// y <- a * x + y
template <SpaceElement E>
void axpy(double a, const E& x, E& y) {
  require_same_space(x, y);
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

template <SpaceElement E>
E linear_combination(double a, const E& x, double b, const E& y) {
  require_same_space(x, y);
  E out = x;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a * x.values[i] + b * y.values[i];
  return out;
}

template <SpaceElement E>
void scale(E& x, double a) {
  for (double& v : x.values) v *= a;
}

}  // namespace uct
