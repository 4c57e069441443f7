#include "uct/space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "uct/errors.hpp"

namespace uct {

ImageGrid::ImageGrid(int nx_, int ny_, double ex, double ey) : nx(nx_), ny(ny_), extent_x(ex), extent_y(ey) {
  if (nx < 1 || ny < 1) throw ConfigError("image grid needs at least one pixel per axis");
  if (!(ex > 0.0) || !(ey > 0.0) || !std::isfinite(ex) || !std::isfinite(ey))
    throw ConfigError("image grid extent must be positive and finite");
}

ImageGrid ImageGrid::square(int n) { return ImageGrid(n, n, n, n); }
ImageGrid ImageGrid::square(int n, double extent) { return ImageGrid(n, n, extent, extent); }

ParallelGeometry::ParallelGeometry(int n_angles, int n_det, double det_extent)
    : n_detectors(n_det), detector_extent(det_extent) {
  if (n_angles < 1) throw ConfigError("parallel geometry needs at least one angle");
  if (n_det < 1) throw ConfigError("parallel geometry needs at least one detector");
  if (!(det_extent > 0.0) || !std::isfinite(det_extent))
    throw ConfigError("detector extent must be positive and finite");
  angles.resize(static_cast<std::size_t>(n_angles));
  for (int k = 0; k < n_angles; ++k) angles[k] = std::numbers::pi * k / n_angles;
}

ParallelGeometry ParallelGeometry::covering(const ImageGrid& grid, int n_angles, int oversampling) {
  if (oversampling < 1) throw ConfigError("detector oversampling must be at least 1");
  const double spacing = std::min(grid.dx(), grid.dy()) / oversampling;
  const double diagonal = std::hypot(grid.extent_x, grid.extent_y);
  // odd count so that one detector sits on the rotation axis
  const int half = static_cast<int>(std::ceil(0.5 * diagonal / spacing));
  const int n_det = 2 * half + 1;
  return ParallelGeometry(n_angles, n_det, n_det * spacing);
}

double ParallelGeometry::angle_step() const {
  if (angles.empty()) throw ConfigError("parallel geometry has no angles");
  return std::numbers::pi / static_cast<double>(angles.size());
}

Image::Image(const ImageGrid& g, double fill) : grid(g), values(g.size(), fill) {}

Image::Image(const ImageGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw ShapeError("image values (" + std::to_string(values.size()) + ") do not match grid (" +
                     std::to_string(grid.size()) + ")");
}

bool Image::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Sinogram::Sinogram(const ParallelGeometry& g, double fill) : geometry(g), values(g.size(), fill) {}

Sinogram::Sinogram(const ParallelGeometry& g, std::vector<double> v) : geometry(g), values(std::move(v)) {
  if (values.size() != geometry.size())
    throw ShapeError("sinogram values (" + std::to_string(values.size()) + ") do not match geometry (" +
                     std::to_string(geometry.size()) + ")");
}

bool Sinogram::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

VectorField::VectorField(const ImageGrid& g, double fill) : grid(g), values(2 * g.size(), fill) {}

void require_same_space(const Image& a, const Image& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw ShapeError("images live on different grids");
}

void require_same_space(const Sinogram& a, const Sinogram& b) {
  if (!(a.geometry == b.geometry) || a.values.size() != b.values.size())
    throw ShapeError("sinograms have different geometries");
}

void require_same_space(const VectorField& a, const VectorField& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw ShapeError("vector fields live on different grids");
}

namespace {

double weighted_dot(const std::vector<double>& a, const std::vector<double>& b, double measure) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum * measure;
}

}  // namespace

double inner_product(const Image& a, const Image& b) {
  require_same_space(a, b);
  return weighted_dot(a.values, b.values, a.cell_measure());
}

double inner_product(const Sinogram& a, const Sinogram& b) {
  require_same_space(a, b);
  return weighted_dot(a.values, b.values, a.cell_measure());
}

double inner_product(const VectorField& a, const VectorField& b) {
  require_same_space(a, b);
  return weighted_dot(a.values, b.values, a.cell_measure());
}

double l2_norm_sq(const Image& a) { return inner_product(a, a); }
double l2_norm_sq(const Sinogram& a) { return inner_product(a, a); }
double l2_norm_sq(const VectorField& a) { return inner_product(a, a); }

}  // namespace uct
