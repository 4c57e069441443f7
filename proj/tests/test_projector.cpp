#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "support.hpp"
#include "uct/errors.hpp"
#include "uct/phantoms.hpp"
#include "uct/projector.hpp"

using namespace uct;

namespace {

// Spatial-domain Ram-Lak convolution, written independently of the FFT path.
std::vector<double> direct_ramp(std::span<const double> row, double dt) {
  const int n = static_cast<int>(row.size());
  std::vector<double> out(row.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const int k = std::abs(i - j);
      double h = 0.0;
      if (k == 0) h = 1.0 / (4.0 * dt * dt);
      else if (k % 2 == 1) h = -1.0 / (std::numbers::pi * std::numbers::pi * k * k * dt * dt);
      acc += h * row[j];
    }
    out[i] = acc * dt;
  }
  return out;
}

}  // namespace

TEST_CASE("ray transform adjoint identity on random instances") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int nx = rng.uniform_int(3, 24);
    const int ny = rng.uniform_int(3, 24);
    const ImageGrid grid(nx, ny, rng.uniform(0.5, 30.0), rng.uniform(0.5, 30.0));
    const ParallelGeometry geom(rng.uniform_int(1, 17), rng.uniform_int(1, 40), rng.uniform(1.0, 60.0));
    const RayTransform ray(grid, geom);
    const Image f = testing::random_image(grid, rng);
    const Sinogram g = testing::random_sinogram(geom, rng);
    const double lhs = inner_product(ray.apply(f), g);
    const double rhs = inner_product(f, ray.adjoint(g));
    CHECK(testing::rel_diff(lhs, rhs) <= 1e-10);
  }
}

TEST_CASE("adjoint matrix is the weighted transpose of the forward matrix") {
  const ImageGrid grid(6, 5, 6.0, 5.0);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 7);
  const RayTransform ray(grid, geom);
  const auto fwd = testing::dense_matrix(grid.size(), [&](const std::vector<double>& v) {
    return ray.apply(Image(grid, v)).values;
  });
  const auto adj = testing::dense_matrix(geom.size(), [&](const std::vector<double>& v) {
    return ray.adjoint(Sinogram(geom, v)).values;
  });
  const double factor = geom.cell_measure() / grid.pixel_area();
  CHECK((adj - factor * fwd.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * fwd.cwiseAbs().maxCoeff());
}

TEST_CASE("constant image gives the box chord length") {
  const ImageGrid grid = ImageGrid::square(32);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 4);  // angles 0, 45, 90, 135 degrees
  const Sinogram g = RayTransform(grid, geom).apply(Image(grid, 1.0));
  for (int d = 0; d < geom.n_detectors; ++d) {
    const double t = geom.detector_center(d);
    if (std::abs(t) < 16.0 - 1.0) {
      CHECK(g.at(0, d) == doctest::Approx(32.0).epsilon(1e-12));
      CHECK(g.at(2, d) == doctest::Approx(32.0).epsilon(1e-12));
    }
  }
  const int center = geom.n_detectors / 2;
  CHECK(g.at(1, center) == doctest::Approx(32.0 * std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("disc projections follow the analytic chord 2 sqrt(r^2 - t^2)") {
  const ImageGrid grid = ImageGrid::square(128);
  const double r = 40.0;
  Image disc(grid);
  for (int iy = 0; iy < 128; ++iy)
    for (int ix = 0; ix < 128; ++ix)
      disc.at(ix, iy) = std::hypot(grid.x_center(ix), grid.y_center(iy)) <= r ? 1.0 : 0.0;
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 12);
  const Sinogram g = RayTransform(grid, geom).apply(disc);
  std::vector<double> analytic(g.size());
  for (int k = 0; k < geom.n_angles(); ++k)
    for (int d = 0; d < geom.n_detectors; ++d) {
      const double t = geom.detector_center(d);
      analytic[static_cast<std::size_t>(k) * geom.n_detectors + d] = std::abs(t) < r ? 2.0 * std::sqrt(r * r - t * t) : 0.0;
    }
  CHECK(testing::rel_l2(g.values, analytic) < 0.02);
}

TEST_CASE("forward and adjoint are bit-identical across worker counts") {
  Rng rng(22);
  const ImageGrid grid = ImageGrid::square(33);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 29);
  const Image f = testing::random_image(grid, rng);
  const Sinogram g = testing::random_sinogram(geom, rng);
  const RayTransform one(grid, geom, 1);
  for (int workers : {2, 3, 8}) {
    const RayTransform many(grid, geom, workers);
    CHECK(many.apply(f).values == one.apply(f).values);
    CHECK(many.adjoint(g).values == one.adjoint(g).values);
  }
}

TEST_CASE("shape mismatches and call counts") {
  const ImageGrid grid = ImageGrid::square(8);
  const RayTransform ray(grid, ParallelGeometry::covering(grid, 3));
  CHECK_THROWS_AS((void)ray.apply(Image(ImageGrid::square(9))), ShapeError);
  CHECK_THROWS_AS((void)ray.adjoint(Sinogram(ParallelGeometry(3, 4, 4.0))), ShapeError);
  ray.reset_call_counts();
  const RayTransform copy = ray;
  (void)copy.apply(Image(grid));
  (void)ray.adjoint(Sinogram(ray.geometry()));
  CHECK(ray.call_counts().forward == 1);
  CHECK(ray.call_counts().adjoint == 1);
}

TEST_CASE("ramp filter matches direct spatial convolution") {
  Rng rng(23);
  const ParallelGeometry geom(5, 37, 18.5);
  const Sinogram g = testing::random_sinogram(geom, rng);
  const Sinogram filtered = ramp_filter(g, RampFilterSpec::ramp());
  for (int k = 0; k < geom.n_angles(); ++k) {
    const auto oracle = direct_ramp(g.row(k), geom.detector_step());
    const std::vector<double> got(filtered.row(k).begin(), filtered.row(k).end());
    CHECK(testing::rel_l2(got, oracle) < 1e-10);
  }
}

TEST_CASE("Hann window smooths and validates its bandwidth") {
  CHECK_THROWS_AS(RampFilterSpec::hann(0.0).validate(), ConfigError);
  CHECK_THROWS_AS(RampFilterSpec::hann(1.5).validate(), ConfigError);
  Rng rng(24);
  const ParallelGeometry geom(3, 64, 64.0);
  const Sinogram g = testing::random_sinogram(geom, rng);
  const double ramp = l2_norm_sq(ramp_filter(g, RampFilterSpec::ramp()));
  const double wide = l2_norm_sq(ramp_filter(g, RampFilterSpec::hann(1.0)));
  const double narrow = l2_norm_sq(ramp_filter(g, RampFilterSpec::hann(0.3)));
  CHECK(narrow < wide);
  CHECK(wide < ramp);
}

TEST_CASE("FBP reconstructs the modified Shepp-Logan phantom from dense data") {
  const ImageGrid grid = ImageGrid::square(128);
  const Image truth = shepp_logan(grid);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 180, 2);
  const RayTransform ray(grid, geom);
  const Image f = fbp(ray, ray.apply(truth));
  CHECK(testing::rel_l2(f.values, truth.values) <= 0.15);
}

TEST_CASE("back-projection inverts the ramp filter on a flat disc") {
  const ImageGrid grid = ImageGrid::square(96);
  Image disc(grid);
  for (int iy = 0; iy < 96; ++iy)
    for (int ix = 0; ix < 96; ++ix)
      disc.at(ix, iy) = std::hypot(grid.x_center(ix), grid.y_center(iy)) <= 30.0 ? 1.0 : 0.0;
  const RayTransform ray(grid, ParallelGeometry::covering(grid, 120));
  const Image f = fbp(ray, ray.apply(disc));
  for (int ix = 38; ix < 58; ++ix) CHECK(f.at(ix, 48) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(f.at(2, 2)) < 0.02);
}

TEST_CASE("FBP is linear, worker independent and rejects mismatched data") {
  Rng rng(25);
  const ImageGrid grid = ImageGrid::square(20);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 9);
  const Sinogram a = testing::random_sinogram(geom, rng);
  const Sinogram b = testing::random_sinogram(geom, rng);
  Sinogram sum(geom);
  for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] = 2.0 * a.values[i] - b.values[i];
  const RayTransform ray(grid, geom);
  const Image fa = fbp(ray, a);
  const Image fb = fbp(ray, b);
  const Image fs = fbp(ray, sum);
  std::vector<double> combo(fa.values.size());
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = 2.0 * fa.values[i] - fb.values[i];
  CHECK(testing::rel_l2(fs.values, combo) < 1e-12);
  CHECK(fbp(RayTransform(grid, geom, 4), a).values == fa.values);
  const Image zero = fbp(ray, Sinogram(geom));
  CHECK(std::all_of(zero.values.begin(), zero.values.end(), [](double v) { return v == 0.0; }));
  CHECK_THROWS_AS((void)fbp(ray, Sinogram(ParallelGeometry::covering(grid, 8))), ShapeError);
  CHECK_THROWS_AS((void)ParallelGeometry::covering(grid, 8, 0), ConfigError);
}

TEST_CASE("power method agrees with the dense largest singular value") {
  const ImageGrid grid(8, 8, 8.0, 8.0);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 6);
  const RayTransform ray(grid, geom);
  const auto m = testing::dense_matrix(grid.size(), [&](const std::vector<double>& v) {
    return ray.apply(Image(grid, v)).values;
  });
  // Weighted operator norm: sqrt(w_Y) P / sqrt(w_X).
  const Eigen::MatrixXd weighted = std::sqrt(geom.cell_measure() / grid.pixel_area()) * m;
  const double sigma_max = Eigen::JacobiSVD<Eigen::MatrixXd>(weighted).singularValues()(0);

  double previous = 0.0;
  for (int iters : {10, 20, 40, 80, 160}) {
    const double est = power_method_norm(ray, Image(grid), iters, 5);
    CHECK(est >= previous - 1e-12 * sigma_max);
    CHECK(est <= sigma_max * (1.0 + 1e-12));
    previous = est;
  }
  CHECK(previous == doctest::Approx(sigma_max).epsilon(1e-6));
  CHECK_THROWS_AS((void)power_method_norm(ray, Image(grid), 5, 1), ConfigError);
}

namespace {

struct ScaledIdentity {
  using domain_type = Image;
  using range_type = Image;
  double factor = 1.0;
  [[nodiscard]] Image apply(const Image& x) const {
    Image y = x;
    scale(y, factor);
    return y;
  }
  [[nodiscard]] Image adjoint(const Image& y) const { return apply(y); }
};

}  // namespace

TEST_CASE("power method on operators with known spectrum") {
  const Image proto(ImageGrid::square(16));
  CHECK(power_method_norm(ScaledIdentity{1.0}, proto, 10, 3) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(power_method_norm(ScaledIdentity{3.0}, proto, 10, 3) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("adjoint of a single sinogram bin stays on the ray footprint") {
  const ImageGrid grid = ImageGrid::square(24);
  const ParallelGeometry geom = ParallelGeometry::covering(grid, 7);
  const RayTransform ray(grid, geom);
  Sinogram g(geom);
  const int k = 3;
  const int d = geom.n_detectors / 2 + 4;
  g.at(k, d) = 1.0;
  const Image back = ray.adjoint(g);
  // Footprint oracle: pixels touched by the forward stencil of that bin.
  std::vector<bool> touched(grid.size(), false);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    Image e(grid);
    e.values[p] = 1.0;
    touched[p] = ray.apply(e).at(k, d) != 0.0;
  }
  int support = 0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    CHECK((back.values[p] != 0.0) == touched[p]);
    support += touched[p] ? 1 : 0;
  }
  CHECK(support > 0);
  CHECK(support < static_cast<int>(grid.size()) / 4);
}
