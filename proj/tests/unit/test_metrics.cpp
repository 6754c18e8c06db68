#include <cmath>

#include "chaosot/error.hpp"
#include "chaosot/fft.hpp"
#include "chaosot/linalg.hpp"
#include "chaosot/metrics.hpp"
#include "chaosot/rng.hpp"
#include "doctest.h"

using namespace chaosot;

TEST_CASE("FFT matches a direct DFT") {
  const std::size_t m = 16;
  std::vector<double> x(m);
  CounterRng rng(1);
  for (double& v : x) v = rng.normal();
  auto spec = fft_real(x);
  REQUIRE(spec.size() == m / 2 + 1);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    Complex direct(0.0);
    for (std::size_t i = 0; i < m; ++i) direct += x[i] * std::polar(1.0, -2.0 * M_PI * double(k * i) / double(m));
    CHECK(std::abs(spec[k] - direct) < 1e-12);
  }
  double resid = 1.0;
  auto back = ifft_real(spec, m, &resid);
  for (std::size_t i = 0; i < m; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-13));
  CHECK(resid < 1e-14);
}

TEST_CASE("energy spectrum of a non-power-of-two grid uses a direct DFT") {
  std::vector<double> x(20);
  for (std::size_t i = 0; i < 20; ++i) x[i] = std::cos(2.0 * M_PI * 3.0 * double(i) / 20.0);
  auto e = energy_spectrum(x);
  REQUIRE(e.size() == 20);
  CHECK(e[3] == doctest::Approx(100.0));
  CHECK(e[17] == doctest::Approx(100.0));
  CHECK(e[0] < 1e-20);
  CHECK(e[5] < 1e-20);
  CHECK_THROWS_AS(fft_real(x), DimensionError);
}

TEST_CASE("Parseval for the energy spectrum") {
  std::vector<double> x(32);
  CounterRng rng(2);
  for (double& v : x) v = rng.normal();
  auto e = energy_spectrum(x);
  REQUIRE(e.size() == 32);
  double se = 0.0, sx = 0.0;
  for (double v : e) se += v;
  for (double v : x) sx += v * v;
  CHECK(se == doctest::Approx(32.0 * sx).epsilon(1e-12));
}

TEST_CASE("Jacobi eigendecomposition reconstructs the matrix") {
  const std::size_t n = 5;
  CounterRng rng(3);
  std::vector<double> b(n * n), a(n * n, 0.0);
  for (double& v : b) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) a[i * n + j] += b[i * n + k] * b[j * n + k];
  SymmetricEigen e = jacobi_eigen(a, n);
  for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] >= e.values[k]);
  for (std::size_t k = 0; k < n; ++k) {
    auto v = e.vector(k);
    std::vector<double> av(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) av[i] += a[i * n + j] * v[j];
    for (std::size_t i = 0; i < n; ++i) CHECK(av[i] == doctest::Approx(e.values[k] * v[i]).epsilon(1e-10));
  }
}

TEST_CASE("singular values of a diagonal matrix") {
  Tensor w = Tensor::matrix(2, 3, {0, -3, 0, 2, 0, 0});
  auto s = singular_values(w);
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(2.0));
}

TEST_CASE("relative RMSE") {
  std::vector<double> t{3, 4, 1, 0}, p{3, 4, 2, 0};
  CHECK(relative_rmse(p, t, 2) == doctest::Approx(0.5 * (0.0 + 1.0)));
  CHECK_THROWS_AS(relative_rmse(p, std::vector<double>{1, 2, 3}, 2), DimensionError);
  CHECK_THROWS_AS(relative_rmse(p, std::vector<double>{0, 0, 1, 1}, 2), NumericalError);
}

TEST_CASE("spectral distance vanishes on identical and shifted fields") {
  const auto spec = SystemSpec::lorenz96(16, 8.0);
  Trajectory a = simulate(spec, default_initial_state(spec, 1), 40, 0.05, 100, 1);
  CHECK(spectral_distance(a, a) == 0.0);
  Trajectory b = a;
  for (std::size_t t = 0; t < a.steps; ++t)
    for (std::size_t i = 0; i < 16; ++i) b.row(t)[i] = a.row(t)[(i + 5) % 16];
  CHECK(spectral_distance(a, b) < 1e-12);
  Trajectory c = a;
  for (double& v : c.states) v *= 2.0;
  CHECK(spectral_distance(a, c) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("spectral derivative is exact on resolved modes") {
  const std::size_t m = 32;
  const double length = 10.0, q = 2.0 * M_PI * 3.0 / length;
  Tensor d1 = spectral_derivative_matrix(m, length, 1), d2 = spectral_derivative_matrix(m, length, 2);
  std::vector<double> u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = std::sin(q * length * double(i) / double(m));
  auto du = matvec(d1, u), ddu = matvec(d2, u);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = length * double(i) / double(m);
    CHECK(du[i] == doctest::Approx(q * std::cos(q * x)).epsilon(1e-10));
    CHECK(ddu[i] == doctest::Approx(-q * q * std::sin(q * x)).epsilon(1e-10));
  }
}

TEST_CASE("histogram error is bounded by 2 and zero on identical clouds") {
  CounterRng rng(4);
  std::vector<double> a(300), b(300);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal() + 100.0;
  PointCloud x(100, 3, a), y(100, 3, b);
  CHECK(l1_hist_error(x, x) == 0.0);
  const double far = l1_hist_error(x, y);
  CHECK(far <= 2.0);
  CHECK(far > 1.9);
}

TEST_CASE("fixed summary on the tape matches the trajectory summary") {
  const auto spec = SystemSpec::lorenz96(8, 8.0);
  Trajectory t = simulate(spec, default_initial_state(spec, 2), 2, 0.05, 50, 1);
  ad::Tape tape;
  ad::Var in = tape.constant(Tensor({1, 8}, std::vector<double>(t.row(0).begin(), t.row(0).end())));
  ad::Var out = tape.constant(Tensor({1, 8}, std::vector<double>(t.row(1).begin(), t.row(1).end())));
  ad::Var s = fixed_summary_on_tape(SystemKind::l96, in, out, 0.05, 0.0);
  REQUIRE(s.shape() == Shape{8, 3});
  const auto u = t.row(1);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(s.value().at(i, 0) == doctest::Approx((u[i] - t.row(0)[i]) / 0.05));
    CHECK(s.value().at(i, 1) == doctest::Approx((u[(i + 1) % 8] - u[(i + 6) % 8]) * u[(i + 7) % 8]));
    CHECK(s.value().at(i, 2) == u[i]);
  }
}

TEST_CASE("Gaussian moment constant") {
  CHECK(gaussian_kappa(2.0, 4, 40000, 1) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(gaussian_kappa(1.0, 1, 40000, 2) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.02));
}

TEST_CASE("displacement covariance trace equals the exact OT cost") {
  CounterRng rng(5);
  std::vector<double> a(12), b(12);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal();
  DisplacementCovariance c = displacement_covariance(PointCloud(6, 2, a), PointCloud(6, 2, b));
  CHECK(c.matrix.at(0, 0) + c.matrix.at(1, 1) == doctest::Approx(c.ot_cost).epsilon(1e-12));
}

TEST_CASE("metrics CSV") {
  std::vector<MetricRow> rows{{"rmse", "clean", 0.5}};
  CHECK(metrics_csv(rows) == "metric,setting,value\nrmse,clean,0.5\n");
}
