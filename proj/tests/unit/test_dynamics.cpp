#include <cmath>
#include <numeric>

#include "chaosot/dynamics.hpp"
#include "chaosot/error.hpp"
#include "chaosot/metrics.hpp"
#include "doctest.h"

using namespace chaosot;

namespace {

// Largest Lyapunov exponent of L63 from the variational equation, integrated
// jointly with the state by RK4 and renormalised every step.
double l63_tangent_lle(double horizon, double dt) {
  const L63Params p;
  std::vector<double> z{1.0, 1.0, 1.0, 1.0, 0.0, 0.0};  // state, tangent
  auto rhs = [&](std::span<const double> s, std::span<double> ds) {
    const double x = s[0], y = s[1], w = s[2];
    ds[0] = p.sigma * (y - x);
    ds[1] = x * (p.rho - w) - y;
    ds[2] = x * y - p.beta * w;
    const double a = s[3], b = s[4], c = s[5];
    ds[3] = p.sigma * (b - a);
    ds[4] = (p.rho - w) * a - b - x * c;
    ds[5] = y * a + x * b - p.beta * c;
  };
  for (int k = 0; k < 2000; ++k) z = rk4_step(rhs, z, dt);
  double log_sum = 0.0;
  const auto steps = static_cast<std::size_t>(horizon / dt);
  for (std::size_t k = 0; k < steps; ++k) {
    z = rk4_step(rhs, z, dt);
    const double n = std::sqrt(z[3] * z[3] + z[4] * z[4] + z[5] * z[5]);
    log_sum += std::log(n);
    for (int i = 3; i < 6; ++i) z[i] /= n;
  }
  return log_sum / (static_cast<double>(steps) * dt);
}

}  // namespace

TEST_CASE("system specs report kind and dimension") {
  CHECK(SystemSpec::lorenz63().dim() == 3);
  CHECK(SystemSpec::lorenz96(40, 8.0).dim() == 40);
  CHECK(SystemSpec::kuramoto_sivashinsky(64, 22.0).kind() == SystemKind::ks);
  CHECK(parse_system_kind("l96") == SystemKind::l96);
  CHECK_THROWS_AS(parse_system_kind("lorenz"), InvalidArgument);
  CHECK_THROWS_AS(SystemSpec::lorenz96(3, 8.0), InvalidArgument);
  CHECK_THROWS_AS(SystemSpec::kuramoto_sivashinsky(100, 22.0), InvalidArgument);
}

TEST_CASE("equilibria are fixed points of the vector fields") {
  const L63Params p;
  const double c = std::sqrt(p.beta * (p.rho - 1.0));
  for (double s : {1.0, -1.0}) {
    State eq{s * c, s * c, p.rho - 1.0};
    for (double v : rhs_l63(eq, p)) CHECK(std::abs(v) < 1e-12);
  }
  State flat(12, 8.0);
  for (double v : rhs_l96(flat, 8.0)) CHECK(v == 0.0);
}

TEST_CASE("L96 tendency matches the advection formula") {
  State u{1, 2, 3, 4, 5};
  State du = rhs_l96(u, 8.0);
  // du_0 = (u_1 - u_3) u_4 - u_0 + F
  CHECK(du[0] == doctest::Approx((2.0 - 4.0) * 5.0 - 1.0 + 8.0));
  CHECK(du[2] == doctest::Approx((4.0 - 1.0) * 2.0 - 3.0 + 8.0));
}

TEST_CASE("RK4 is fourth order on exponential decay") {
  OdeRhs rhs = [](std::span<const double> u, std::span<double> du) { du[0] = -u[0]; };
  auto err = [&](double h) {
    State u{1.0};
    for (int k = 0; k < static_cast<int>(std::lround(1.0 / h)); ++k) u = rk4_step(rhs, u, h);
    return std::abs(u[0] - std::exp(-1.0));
  };
  const double order = std::log2(err(0.1) / err(0.05));
  CHECK(order == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("ETDRK4 propagates a small Fourier mode at its linear rate") {
  const std::size_t m = 64;
  const double length = 22.0, dt = 0.25;
  EtdCoefficients c = make_etdrk4_coefficients(m, length, dt);
  const double q = 2.0 * M_PI * 2.0 / length;
  State u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = 1e-9 * std::cos(q * length * static_cast<double>(i) / m);
  double resid = 0.0;
  State v = ks_etdrk4_step(u, c, &resid);
  const double growth = std::exp((q * q - q * q * q * q) * dt);
  for (std::size_t i = 0; i < m; i += 7) CHECK(1e9 * v[i] == doctest::Approx(1e9 * growth * u[i]).epsilon(1e-6));
  CHECK(resid < 1e-18);
}

TEST_CASE("KS conserves the spatial mean") {
  const auto spec = SystemSpec::kuramoto_sivashinsky(64, 22.0);
  State u0 = default_initial_state(spec, 3);
  Trajectory t = simulate(spec, u0, 50, 0.25, 0, 1);
  const double m0 = std::accumulate(u0.begin(), u0.end(), 0.0);
  auto last = t.row(t.steps - 1);
  const double m1 = std::accumulate(last.begin(), last.end(), 0.0);
  CHECK(std::abs(m1 - m0) < 1e-9);
}

TEST_CASE("simulate honours burn-in and substeps") {
  const auto spec = SystemSpec::lorenz63();
  State u0 = default_initial_state(spec, 0);
  Trajectory a = simulate(spec, u0, 20, 0.01, 5, 1);
  Trajectory b = simulate(spec, u0, 25, 0.01, 0, 1);
  REQUIRE(a.steps == 20);
  CHECK(a.dim == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.row(0)[i] == b.row(5)[i]);
  Trajectory fine = simulate(spec, u0, 10, 0.02, 0, 2);
  Trajectory coarse = simulate(spec, u0, 19, 0.01, 0, 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(fine.row(9)[i] == doctest::Approx(coarse.row(18)[i]).epsilon(1e-12));
}

TEST_CASE("blow-up is reported with the failing step") {
  StepFn explode = [](State& u) { u[0] *= 100.0; };
  try {
    simulate(explode, SystemKind::generic, State{1.0}, 10, 0.1, 0);
    FAIL("expected BlowUpError");
  } catch (const BlowUpError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 4);
  }
}

TEST_CASE("observation noise has the requested pooled scale and is seeded") {
  const auto spec = SystemSpec::lorenz96(20, 8.0);
  Trajectory clean = simulate(spec, default_initial_state(spec, 1), 500, 0.05, 100, 1);
  Trajectory noisy = add_noise(clean, {0.2, 9});
  Trajectory again = add_noise(clean, {0.2, 9});
  CHECK(noisy.states == again.states);
  std::vector<double> diff(clean.states.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.states[i] - clean.states[i];
  CHECK(pooled_std(diff) == doctest::Approx(0.2 * pooled_std(clean.states)).epsilon(0.02));
  CHECK(add_noise(clean, {0.0, 9}).states == clean.states);
  CHECK_THROWS_AS(add_noise(clean, {-1.0, 0}), InvalidArgument);
}

TEST_CASE("tangent-integration oracle for the L63 exponent") {
  const double oracle = l63_tangent_lle(2000.0, 0.01);
  CHECK(oracle == doctest::Approx(0.906).epsilon(0.03));

  const auto spec = SystemSpec::lorenz63();
  BenettinOptions opt;
  opt.dt = 0.1;
  opt.horizon = 10000;
  opt.warmup = 100;
  BenettinResult r = benettin_lle(make_step_fn(spec, 0.1, 10), default_initial_state(spec, 0), opt);
  CHECK(r.rescalings > 0);
  CHECK(r.lle == doctest::Approx(oracle).epsilon(0.06));
}

TEST_CASE("Benettin recovers the rate of a linear map") {
  StepFn step = [](State& u) {
    u[0] *= std::exp(0.05);
    u[1] *= std::exp(-0.2);
  };
  BenettinOptions opt;
  opt.dt = 0.1;
  opt.horizon = 50000;
  opt.warmup = 10;
  // The random start direction adds an O(1 / horizon) alignment transient.
  BenettinResult r = benettin_lle(step, State{0.0, 0.0}, opt);
  CHECK(r.lle == doctest::Approx(0.5).epsilon(1e-3));
}
