#pragma once

// Test-only helpers: random elements, dense operator matrices and
// finite-difference derivatives. Nothing here calls into the code under test
// beyond the element constructors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "uct/rng.hpp"
#include "uct/space.hpp"

namespace testing {

inline uct::Image random_image(const uct::ImageGrid& grid, uct::Rng& rng, double lo = -1.0, double hi = 1.0) {
  uct::Image f(grid);
  for (double& v : f.values) v = rng.uniform(lo, hi);
  return f;
}

inline uct::Sinogram random_sinogram(const uct::ParallelGeometry& geom, uct::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
  uct::Sinogram g(geom);
  for (double& v : g.values) v = rng.uniform(lo, hi);
  return g;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

/// Column j is map(e_j); the map acts on raw value vectors.
inline Eigen::MatrixXd dense_matrix(std::size_t in_size,
                                    const std::function<std::vector<double>(const std::vector<double>&)>& map) {
  std::vector<double> e(in_size, 0.0);
  Eigen::MatrixXd m;
  for (std::size_t j = 0; j < in_size; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = map(e);
    if (j == 0) m.resize(static_cast<Eigen::Index>(col.size()), static_cast<Eigen::Index>(in_size));
    for (std::size_t i = 0; i < col.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  return m;
}

/// Central difference of a scalar function along direction d.
inline double central_difference(const std::function<double(const std::vector<double>&)>& fn,
                                 const std::vector<double>& x, const std::vector<double>& d, double h) {
  std::vector<double> xp = x;
  std::vector<double> xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * d[i];
    xm[i] -= h * d[i];
  }
  return (fn(xp) - fn(xm)) / (2.0 * h);
}

/// Full central-difference gradient of a scalar function.
inline std::vector<double> numerical_gradient(const std::function<double(const std::vector<double>&)>& fn,
                                              const std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = xp[i];
    xp[i] = keep + h;
    const double fp = fn(xp);
    xp[i] = keep - h;
    const double fm = fn(xp);
    xp[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace testing
