#include "uct/tv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uct/errors.hpp"
#include "uct/projector.hpp"

namespace uct {

void CpConfig::validate() const {
  if (sigma < 0.0 || tau < 0.0) throw ConfigError("step sizes must be >= 0 (0 selects the default)");
  if (theta < 0.0 || theta > 1.0) throw ConfigError("relaxation theta must lie in [0, 1]");
  if (gradient_scale < 0.0) throw ConfigError("gradient_scale must be >= 0 (0 selects the balanced scale)");
  if (!(step_ratio > 0.0)) throw ConfigError("step_ratio must be > 0");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (power_iterations < 10) throw ConfigError("power_iterations must be >= 10");
}

Sinogram prox_dual_l2(const Sinogram& h, double sigma, const Sinogram& g) {
  require_same_space(h, g);
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  Sinogram out = h;
  const double s = 1.0 / (1.0 + sigma);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (h.values[i] - sigma * g.values[i]) * s;
  return out;
}

Sinogram prox_dual_kl(const Sinogram& h, double sigma, const Sinogram& g) {
  require_same_space(h, g);
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  Sinogram out = h;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double gi = g.values[i];
    if (gi < 0.0) throw ValidationError("KL prox needs nonnegative data");
    const double a = h.values[i] - 1.0;
    out.values[i] = 0.5 * (1.0 + h.values[i] - std::sqrt(a * a + 4.0 * sigma * gi));
  }
  return out;
}

VectorField prox_dual_tv(const VectorField& v, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("TV weight must be > 0");
  VectorField out = v;
  auto x = out.component(0);
  auto y = out.component(1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double norm = std::sqrt(x[i] * x[i] + y[i] * y[i]);
    if (norm > lambda) {
      const double s = lambda / norm;
      x[i] *= s;
      y[i] *= s;
    }
  }
  return out;
}

namespace {

double data_term(const ForwardModel& model, const Sinogram& forward_value, const Sinogram& g) {
  if (model.kind() == ForwardKind::beer_lambert) return kl_divergence_values(forward_value, g);
  Sinogram r = linear_combination(1.0, forward_value, -1.0, g);
  return 0.5 * l2_norm_sq(r);
}

}  // namespace

double tv_objective(const ForwardModel& model, const Image& f, const Sinogram& g, double lambda) {
  return data_term(model, model.apply(f), g) + lambda * total_variation(f);
}

double l2_norm_sq(const TvDual& y) { return l2_norm_sq(y.data) + l2_norm_sq(y.gradient); }

TvOperator::TvOperator(const ForwardModel& model, const Image& f0, double gradient_scale)
    : model_(&model), f0_(f0), c_(gradient_scale) {}

TvDual TvOperator::apply(const Image& h) const {
  TvDual out{model_->derivative(f0_, h), spatial_gradient(h)};
  scale(out.gradient, c_);
  return out;
}

Image TvOperator::adjoint(const TvDual& y) const {
  Image out = model_->derivative_adjoint(f0_, y.data);
  axpy(-c_, spatial_divergence(y.gradient), out);
  return out;
}

double tv_operator_norm(const ForwardModel& model, const Image& f0, double gradient_scale, const CpConfig& cfg) {
  return power_method_norm(TvOperator(model, f0, gradient_scale), f0, cfg.power_iterations, cfg.power_seed);
}

namespace {

struct DataBlock {
  using domain_type = Image;
  using range_type = Sinogram;
  const ForwardModel* model;
  const Image* f0;
  [[nodiscard]] Sinogram apply(const Image& h) const { return model->derivative(*f0, h); }
  [[nodiscard]] Image adjoint(const Sinogram& y) const { return model->derivative_adjoint(*f0, y); }
};

struct GradientBlock {
  using domain_type = Image;
  using range_type = VectorField;
  [[nodiscard]] VectorField apply(const Image& h) const { return spatial_gradient(h); }
  [[nodiscard]] Image adjoint(const VectorField& v) const {
    Image out = spatial_divergence(v);
    scale(out, -1.0);
    return out;
  }
};

}  // namespace

double balanced_gradient_scale(const ForwardModel& model, const Image& f0, const CpConfig& cfg) {
  const double data = power_method_norm(DataBlock{&model, &f0}, f0, cfg.power_iterations, cfg.power_seed);
  const double grad = power_method_norm(GradientBlock{}, f0, cfg.power_iterations, cfg.power_seed);
  if (!(data > 0.0) || !(grad > 0.0)) return 1.0;
  return data / grad;
}

TvResult chambolle_pock_tv(const ForwardModel& model, const Sinogram& g, double lambda, const CpConfig& cfg) {
  cfg.validate();
  if (lambda < 0.0) throw ConfigError("TV weight must be >= 0");
  if (g.geometry != model.ray().geometry()) throw ShapeError("sinogram geometry does not match the forward model");
  const bool kl = model.kind() == ForwardKind::beer_lambert;

  TvResult out;
  out.f = Image(model.ray().grid());
  out.gradient_scale = cfg.gradient_scale > 0.0 ? cfg.gradient_scale : balanced_gradient_scale(model, out.f, cfg);
  const double c = out.gradient_scale;
  out.op_norm = tv_operator_norm(model, out.f, c, cfg);
  out.sigma = cfg.sigma > 0.0 ? cfg.sigma : 0.95 / (out.op_norm * cfg.step_ratio);
  out.tau = cfg.tau > 0.0 ? cfg.tau : 0.95 * cfg.step_ratio / out.op_norm;
  if (!(out.sigma * out.tau * out.op_norm * out.op_norm < 1.0))
    throw ConfigError("step sizes violate sigma * tau * ||K||^2 < 1 (sigma=" + std::to_string(out.sigma) +
                      ", tau=" + std::to_string(out.tau) + ", ||K||=" + std::to_string(out.op_norm) + ")");

  Image& f = out.f;
  Image f_bar = f;
  Sinogram h_data(g.geometry);
  VectorField h_grad(f.grid);
  Sinogram t_f = model.apply(f);  // T(f)
  Sinogram t_bar = t_f;           // T(f_bar)
  out.objective.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 1; it <= cfg.iterations; ++it) {
    axpy(out.sigma, t_bar, h_data);
    h_data = kl ? prox_dual_kl(h_data, out.sigma, g) : prox_dual_l2(h_data, out.sigma, g);
    axpy(out.sigma * c, spatial_gradient(f_bar), h_grad);
    if (lambda > 0.0) {
      h_grad = prox_dual_tv(h_grad, lambda / c);
    } else {
      std::fill(h_grad.values.begin(), h_grad.values.end(), 0.0);
    }

    Image step = model.derivative_adjoint(f, h_data);
    axpy(-c, spatial_divergence(h_grad), step);
    Image f_new = f;
    axpy(-out.tau, step, f_new);
    if (!f_new.all_finite()) throw NumericalError("TV iterate " + std::to_string(it) + " is not finite");

    f_bar = linear_combination(1.0 + cfg.theta, f_new, -cfg.theta, f);
    Sinogram t_new = model.apply(f_new);
    if (kl) {
      t_bar = model.apply(f_bar);
    } else {
      t_bar = linear_combination(1.0 + cfg.theta, t_new, -cfg.theta, t_f);
    }
    f = std::move(f_new);
    t_f = std::move(t_new);
    out.objective.push_back(data_term(model, t_f, g) + lambda * total_variation(f));
  }
  return out;
}

}  // namespace uct
