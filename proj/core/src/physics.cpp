#include "uct/physics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uct/errors.hpp"

namespace uct {

namespace {

constexpr double kExponentLimit = 700.0;
constexpr double kModelFloor = 1e-12;

void require_nonnegative(const Sinogram& g) {
  for (std::size_t i = 0; i < g.values.size(); ++i)
    if (g.values[i] < 0.0 || std::isnan(g.values[i]))
      throw ValidationError("data must be nonnegative, bin " + std::to_string(i) + " = " +
                            std::to_string(g.values[i]));
}

}  // namespace

std::string_view to_string(ForwardKind kind) {
  return kind == ForwardKind::linear ? "linear" : "beer_lambert";
}

ForwardKind parse_forward_kind(std::string_view text) {
  if (text == "linear") return ForwardKind::linear;
  if (text == "beer_lambert") return ForwardKind::beer_lambert;
  throw ConfigError("unknown forward model '" + std::string(text) + "' (expected linear | beer_lambert)");
}

void BeerLambertParams::validate() const {
  if (!(photons > 0.0) || !std::isfinite(photons)) throw ConfigError("Beer-Lambert photon count must be > 0");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("Beer-Lambert attenuation mu must be > 0");
}

Sinogram forward_beer_lambert(const RayTransform& ray, const Image& f, const BeerLambertParams& p) {
  p.validate();
  Sinogram out = ray.apply(f);
  for (double& v : out.values) v = p.photons * std::exp(std::clamp(-p.mu * v, -kExponentLimit, kExponentLimit));
  return out;
}

Sinogram forward_beer_lambert(const Image& f, const ParallelGeometry& geometry, const BeerLambertParams& p) {
  return forward_beer_lambert(RayTransform(f.grid, geometry), f, p);
}

Image beer_lambert_derivative_adjoint(const RayTransform& ray, const Image& f, const Sinogram& dg,
                                      const BeerLambertParams& p) {
  Sinogram weighted = forward_beer_lambert(ray, f, p);
  require_same_space(weighted, dg);
  for (std::size_t i = 0; i < weighted.values.size(); ++i) weighted.values[i] *= -p.mu * dg.values[i];
  return ray.adjoint(weighted);
}

Image beer_lambert_derivative_adjoint(const Image& f, const Sinogram& dg, const ParallelGeometry& geometry,
                                      const BeerLambertParams& p) {
  return beer_lambert_derivative_adjoint(RayTransform(f.grid, geometry), f, dg, p);
}

Image grad_l2_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g) {
  Sinogram residual = ray.apply(f);
  require_same_space(residual, g);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= g.values[i];
  return ray.adjoint(residual);
}

Image grad_l2_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry) {
  return grad_l2_discrepancy(RayTransform(f.grid, geometry), f, g);
}

double l2_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g) {
  Sinogram residual = ray.apply(f);
  require_same_space(residual, g);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= g.values[i];
  return 0.5 * l2_norm_sq(residual);
}

double kl_divergence_values(const Sinogram& model, const Sinogram& g) {
  require_same_space(model, g);
  require_nonnegative(g);
  double sum = 0.0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double t = std::max(model.values[i], kModelFloor);
    const double gi = g.values[i];
    sum += gi > 0.0 ? t + gi * std::log(gi / t) : t;
  }
  return sum * g.cell_measure();
}

double kl_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g, const BeerLambertParams& p) {
  require_nonnegative(g);
  return kl_divergence_values(forward_beer_lambert(ray, f, p), g);
}

double kl_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry,
                      const BeerLambertParams& p) {
  return kl_discrepancy(RayTransform(f.grid, geometry), f, g, p);
}

Image grad_kl_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g, const BeerLambertParams& p) {
  require_nonnegative(g);
  Sinogram residual = forward_beer_lambert(ray, f, p);
  require_same_space(residual, g);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= g.values[i];
  Image out = ray.adjoint(residual);
  scale(out, -p.mu);
  return out;
}

Image grad_kl_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry,
                          const BeerLambertParams& p) {
  return grad_kl_discrepancy(RayTransform(f.grid, geometry), f, g, p);
}

VectorField spatial_gradient(const Image& f) {
  const ImageGrid& grid = f.grid;
  VectorField v(grid);
  auto gx = v.component(0);
  auto gy = v.component(1);
  const double inv_dx = 1.0 / grid.dx();
  const double inv_dy = 1.0 / grid.dy();
  const int nx = grid.nx;
  const int ny = grid.ny;
  for (int iy = 0; iy < ny; ++iy) {
    const std::size_t row = static_cast<std::size_t>(iy) * nx;
    for (int ix = 0; ix + 1 < nx; ++ix) gx[row + ix] = (f.values[row + ix + 1] - f.values[row + ix]) * inv_dx;
    if (iy + 1 < ny)
      for (int ix = 0; ix < nx; ++ix) gy[row + ix] = (f.values[row + nx + ix] - f.values[row + ix]) * inv_dy;
  }
  return v;
}

Image spatial_divergence(const VectorField& v) {
  const ImageGrid& grid = v.grid;
  Image out(grid);
  auto gx = v.component(0);
  auto gy = v.component(1);
  const double inv_dx = 1.0 / grid.dx();
  const double inv_dy = 1.0 / grid.dy();
  const int nx = grid.nx;
  const int ny = grid.ny;
  for (int iy = 0; iy < ny; ++iy) {
    const std::size_t row = static_cast<std::size_t>(iy) * nx;
    for (int ix = 0; ix < nx; ++ix) {
      double d = 0.0;
      if (ix + 1 < nx) d += gx[row + ix];
      if (ix > 0) d -= gx[row + ix - 1];
      double e = 0.0;
      if (iy + 1 < ny) e += gy[row + ix];
      if (iy > 0) e -= gy[row - nx + ix];
      out.values[row + ix] = d * inv_dx + e * inv_dy;
    }
  }
  return out;
}

double dirichlet_energy(const Image& f) { return 0.5 * l2_norm_sq(spatial_gradient(f)); }

Image grad_dirichlet(const Image& f) {
  Image out = spatial_divergence(spatial_gradient(f));
  scale(out, -1.0);
  return out;
}

double total_variation(const Image& f) {
  const VectorField v = spatial_gradient(f);
  auto gx = v.component(0);
  auto gy = v.component(1);
  double sum = 0.0;
  for (std::size_t i = 0; i < gx.size(); ++i) sum += std::hypot(gx[i], gy[i]);
  return sum * f.cell_measure();
}

ForwardModel::ForwardModel(RayTransform ray, ForwardKind kind, BeerLambertParams params)
    : ray_(std::move(ray)), kind_(kind), params_(params) {
  if (kind_ == ForwardKind::beer_lambert) params_.validate();
}

Sinogram ForwardModel::apply(const Image& f) const {
  return kind_ == ForwardKind::linear ? ray_.apply(f) : forward_beer_lambert(ray_, f, params_);
}

Sinogram ForwardModel::derivative(const Image& f, const Image& h) const {
  Sinogram ph = ray_.apply(h);
  if (kind_ == ForwardKind::linear) return ph;
  const Sinogram t = forward_beer_lambert(ray_, f, params_);
  for (std::size_t i = 0; i < ph.values.size(); ++i) ph.values[i] *= -params_.mu * t.values[i];
  return ph;
}

Image ForwardModel::derivative_adjoint(const Image& f, const Sinogram& dg) const {
  if (kind_ == ForwardKind::linear) return ray_.adjoint(dg);
  return beer_lambert_derivative_adjoint(ray_, f, dg, params_);
}

double ForwardModel::discrepancy(const Image& f, const Sinogram& g) const {
  return kind_ == ForwardKind::linear ? l2_discrepancy(ray_, f, g) : kl_discrepancy(ray_, f, g, params_);
}

Image ForwardModel::discrepancy_gradient(const Image& f, const Sinogram& g) const {
  return discrepancy_gradient_from(apply(f), g);
}

Image ForwardModel::discrepancy_gradient_from(const Sinogram& forward_value, const Sinogram& g) const {
  Sinogram residual = forward_value;
  require_same_space(residual, g);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= g.values[i];
  Image out = ray_.adjoint(residual);
  if (kind_ == ForwardKind::beer_lambert) scale(out, -params_.mu);
  return out;
}

Image ForwardModel::discrepancy_hessian(const Sinogram& forward_value, const Image& h) const {
  Sinogram ph = ray_.apply(h);
  if (kind_ == ForwardKind::beer_lambert) {
    require_same_space(ph, forward_value);
    const double mu2 = params_.mu * params_.mu;
    for (std::size_t i = 0; i < ph.values.size(); ++i) ph.values[i] *= mu2 * forward_value.values[i];
  }
  return ray_.adjoint(ph);
}

}  // namespace uct
