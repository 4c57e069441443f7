#pragma once

// TV-regularized reconstruction with the (non-linear) Chambolle-Pock method.
//
//   min_f  L(T(f), g) + lambda * int |grad f|
//
// written as F(K(f)) + G(f) with K(f) = [T(f), grad f], F(y1, y2) = L(y1, g) +
// lambda int |y2| and G = 0. Each iteration
//   h     <- prox_{sigma F*}(h + sigma K(f_bar))
//   f_new <- f - tau [dK(f)]^* h
//   f_bar <- f_new + theta (f_new - f)

#include <cstdint>
#include <vector>

#include "uct/physics.hpp"
#include "uct/space.hpp"

namespace uct {

struct CpConfig {
  double sigma = 0.0;  // 0 selects 0.95 / ||K||
  double tau = 0.0;    // 0 selects 0.95 / ||K||
  double step_ratio = 1.0;  // automatic steps use tau / sigma = step_ratio^2
  /// K = [T, c grad] with the TV term weighted lambda / c, which leaves the
  /// objective unchanged. 0 selects c = ||dT(f0)|| / ||grad||.
  double gradient_scale = 0.0;
  double theta = 1.0;
  int iterations = 1000;
  int power_iterations = 50;
  std::uint64_t power_seed = 0x5eed;

  void validate() const;
};

/// Conjugate prox of 1/2 ||. - g||^2: (h - sigma g) / (1 + sigma).
Sinogram prox_dual_l2(const Sinogram& h, double sigma, const Sinogram& g);

/// Conjugate prox of the KL data term int y - g log y:
/// (1 + h - sqrt((h - 1)^2 + 4 sigma g)) / 2.
Sinogram prox_dual_kl(const Sinogram& h, double sigma, const Sinogram& g);

/// Pointwise projection onto {|v|_2 <= lambda}.
VectorField prox_dual_tv(const VectorField& v, double lambda);

/// Data term (1/2 ||P f - g||^2 or KL) plus lambda * TV(f).
double tv_objective(const ForwardModel& model, const Image& f, const Sinogram& g, double lambda);

/// Element of the range of K.
struct TvDual {
  Sinogram data;
  VectorField gradient;
};

double l2_norm_sq(const TvDual& y);

/// Linearization h -> [dT(f0) h, grad h] of K at f0, with its adjoint.
class TvOperator {
 public:
  using domain_type = Image;
  using range_type = TvDual;

  TvOperator(const ForwardModel& model, const Image& f0, double gradient_scale = 1.0);

  [[nodiscard]] TvDual apply(const Image& h) const;
  [[nodiscard]] Image adjoint(const TvDual& y) const;

 private:
  const ForwardModel* model_;
  Image f0_;
  double c_;
};

/// ||K|| at f0 for gradient scale c, by power iteration.
double tv_operator_norm(const ForwardModel& model, const Image& f0, double gradient_scale, const CpConfig& cfg);

/// c = ||dT(f0)|| / ||grad|| (both by power iteration).
double balanced_gradient_scale(const ForwardModel& model, const Image& f0, const CpConfig& cfg);

struct TvResult {
  Image f;
  std::vector<double> objective;  // objective of each iterate f_1 .. f_n
  double op_norm = 0.0;
  double gradient_scale = 1.0;
  double sigma = 0.0;
  double tau = 0.0;
};

/// Starts from f = 0, h = 0. Throws ConfigError when sigma tau ||K||^2 >= 1
/// or lambda < 0, and NumericalError if an iterate becomes non-finite.
TvResult chambolle_pock_tv(const ForwardModel& model, const Sinogram& g, double lambda, const CpConfig& cfg = {});

}  // namespace uct
