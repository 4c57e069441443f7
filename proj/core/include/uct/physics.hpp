#pragma once

#include <string_view>

#include "uct/projector.hpp"
#include "uct/space.hpp"

namespace uct {

enum class ForwardKind { linear, beer_lambert };

std::string_view to_string(ForwardKind kind);
ForwardKind parse_forward_kind(std::string_view text);

/// T(f) = photons * exp(-mu * P f). mu is per unit of grid length.
struct BeerLambertParams {
  double photons = 1.0e4;
  double mu = 0.02;  // water, 0.2 / cm with 1 mm pixels
  void validate() const;
};

/// The forward operator together with its matching data discrepancy:
///   linear        T = P,                 L(y, g) = 1/2 ||y - g||^2
///   beer_lambert  T = lambda exp(-mu P), L(y, g) = int y + g log(g / y)
class ForwardModel {
 public:
  using domain_type = Image;
  using range_type = Sinogram;

  explicit ForwardModel(RayTransform ray, ForwardKind kind = ForwardKind::linear, BeerLambertParams params = {});

  [[nodiscard]] Sinogram apply(const Image& f) const;
  /// dT(f) h
  [[nodiscard]] Sinogram derivative(const Image& f, const Image& h) const;
  /// [dT(f)]^* dg
  [[nodiscard]] Image derivative_adjoint(const Image& f, const Sinogram& dg) const;

  [[nodiscard]] double discrepancy(const Image& f, const Sinogram& g) const;
  [[nodiscard]] Image discrepancy_gradient(const Image& f, const Sinogram& g) const;
  /// Gradient given a precomputed T(f); avoids a second projection.
  [[nodiscard]] Image discrepancy_gradient_from(const Sinogram& forward_value, const Sinogram& g) const;
  /// Jacobian of f -> discrepancy_gradient(f, g) applied to h. The Jacobian is
  /// self-adjoint, so this is also its vector-Jacobian product.
  ///   linear: P*P h      beer_lambert: mu^2 P*(T(f) . P h)
  [[nodiscard]] Image discrepancy_hessian(const Sinogram& forward_value, const Image& h) const;

  [[nodiscard]] const RayTransform& ray() const { return ray_; }
  [[nodiscard]] ForwardKind kind() const { return kind_; }
  [[nodiscard]] const BeerLambertParams& params() const { return params_; }

 private:
  RayTransform ray_;
  ForwardKind kind_;
  BeerLambertParams params_;
};

Sinogram forward_beer_lambert(const RayTransform& ray, const Image& f, const BeerLambertParams& p);
Sinogram forward_beer_lambert(const Image& f, const ParallelGeometry& geometry, const BeerLambertParams& p);

Image beer_lambert_derivative_adjoint(const RayTransform& ray, const Image& f, const Sinogram& dg,
                                      const BeerLambertParams& p);
Image beer_lambert_derivative_adjoint(const Image& f, const Sinogram& dg, const ParallelGeometry& geometry,
                                      const BeerLambertParams& p);

/// P*(P f - g): gradient of 1/2 ||P f - g||^2_Y.
Image grad_l2_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g);
Image grad_l2_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry);
double l2_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g);

/// int T(f) + g log(g / T(f)). Model values are clamped below at 1e-12 and
/// bins with g = 0 contribute T(f) only. Throws ValidationError for g < 0.
double kl_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g, const BeerLambertParams& p);
double kl_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry,
                      const BeerLambertParams& p);
double kl_divergence_values(const Sinogram& model, const Sinogram& g);

/// -mu P*(T(f) - g)
Image grad_kl_discrepancy(const RayTransform& ray, const Image& f, const Sinogram& g, const BeerLambertParams& p);
Image grad_kl_discrepancy(const Image& f, const Sinogram& g, const ParallelGeometry& geometry,
                          const BeerLambertParams& p);

/// Forward differences scaled by the pixel size, zero across the last row /
/// column (Neumann boundary). Component 0 is d/dx, component 1 is d/dy.
VectorField spatial_gradient(const Image& f);
/// Negative transpose of spatial_gradient: <grad f, v> = -<f, div v>.
Image spatial_divergence(const VectorField& v);

/// 1/2 ||grad f||^2 and its gradient grad^* grad f (the negative Laplacian).
double dirichlet_energy(const Image& f);
Image grad_dirichlet(const Image& f);

/// Isotropic total variation int |grad f|_2.
double total_variation(const Image& f);

}  // namespace uct
