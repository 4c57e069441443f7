#pragma once

#include <cstdint>
#include <string_view>

#include "uct/rng.hpp"
#include "uct/space.hpp"

namespace uct {

struct NoiseSpec {
  enum class Kind { none, gaussian, poisson };

  Kind kind = Kind::gaussian;
  /// Gaussian only: sigma = level * mean(|g|) of the noiseless sinogram.
  double level = 0.05;
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {Kind::none, 0.0, 0}; }
  static NoiseSpec gaussian(double level, std::uint64_t seed = 0) { return {Kind::gaussian, level, seed}; }
  static NoiseSpec poisson(std::uint64_t seed = 0) { return {Kind::poisson, 0.0, seed}; }
  void validate() const;
};

std::string_view to_string(NoiseSpec::Kind kind);
NoiseSpec::Kind parse_noise_kind(std::string_view text);

/// g + eta with eta ~ N(0, sigma^2) i.i.d., sigma = level * mean(|g|).
Sinogram add_gaussian_noise(const Sinogram& g, double level, Rng& rng);

/// Independent Poisson draw per bin with mean g. Throws ValidationError on negative means.
Sinogram sample_poisson(const Sinogram& g, Rng& rng);

/// Exact Poisson variate: multiplication method below mean 10, transformed
/// rejection with squeeze (PTRS) above.
std::int64_t poisson_variate(double mean, Rng& rng);

}  // namespace uct
