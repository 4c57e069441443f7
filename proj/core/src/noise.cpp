#include "uct/noise.hpp"

#include <cmath>
#include <string>

#include "uct/errors.hpp"

namespace uct {

void NoiseSpec::validate() const {
  if (kind == Kind::gaussian && !(level > 0.0 && std::isfinite(level)))
    throw ConfigError("gaussian noise level must be > 0");
}

std::string_view to_string(NoiseSpec::Kind kind) {
  switch (kind) {
    case NoiseSpec::Kind::none: return "none";
    case NoiseSpec::Kind::gaussian: return "gaussian";
    case NoiseSpec::Kind::poisson: return "poisson";
  }
  return "none";
}

NoiseSpec::Kind parse_noise_kind(std::string_view text) {
  if (text == "none") return NoiseSpec::Kind::none;
  if (text == "gaussian") return NoiseSpec::Kind::gaussian;
  if (text == "poisson") return NoiseSpec::Kind::poisson;
  throw ConfigError("unknown noise kind '" + std::string(text) + "' (expected none | gaussian | poisson)");
}

Sinogram add_gaussian_noise(const Sinogram& g, double level, Rng& rng) {
  if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("gaussian noise level must be >= 0");
  double mean_abs = 0.0;
  for (double v : g.values) mean_abs += std::abs(v);
  if (!g.values.empty()) mean_abs /= static_cast<double>(g.values.size());
  const double sigma = level * mean_abs;
  Sinogram out = g;
  if (sigma == 0.0) return out;
  for (double& v : out.values) v += sigma * rng.normal();
  return out;
}

std::int64_t poisson_variate(double mean, Rng& rng) {
  if (mean < 0.0 || !std::isfinite(mean)) throw ValidationError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = rng.uniform();
    while (prod > limit) {
      ++k;
      prod *= rng.uniform();
    }
    return k;
  }
  // Hoermann (1993), transformed rejection with squeeze.
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::int64_t>(k);
  }
}

Sinogram sample_poisson(const Sinogram& g, Rng& rng) {
  for (std::size_t i = 0; i < g.values.size(); ++i)
    if (g.values[i] < 0.0 || !std::isfinite(g.values[i]))
      throw ValidationError("Poisson mean must be finite and >= 0 (bin " + std::to_string(i) + ")");
  Sinogram out(g.geometry);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    out.values[i] = static_cast<double>(poisson_variate(g.values[i], rng));
  return out;
}

}  // namespace uct
