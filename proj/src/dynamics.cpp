#include "chaosot/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "chaosot/error.hpp"
#include "chaosot/rng.hpp"
#include "chaosot/tensor.hpp"

namespace chaosot {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::l63: return "l63";
    case SystemKind::l96: return "l96";
    case SystemKind::ks: return "ks";
    case SystemKind::generic: return "generic";
  }
  return "generic";
}

SystemKind parse_system_kind(const std::string& name) {
  if (name == "l63") return SystemKind::l63;
  if (name == "l96") return SystemKind::l96;
  if (name == "ks") return SystemKind::ks;
  if (name == "generic") return SystemKind::generic;
  throw InvalidArgument("unknown system '" + name + "' (expected l63, l96 or ks)");
}

SystemSpec::SystemSpec(Variant params) : params_(std::move(params)) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, L63Params>) {
          if (!std::isfinite(p.sigma) || !std::isfinite(p.rho) || !std::isfinite(p.beta))
            throw InvalidArgument("L63 parameters must be finite");
        } else if constexpr (std::is_same_v<P, L96Params>) {
          if (p.sites < 4) throw InvalidArgument("L96 needs at least 4 sites");
          if (!std::isfinite(p.forcing)) throw InvalidArgument("L96 forcing must be finite");
        } else {
          if (!is_power_of_two(p.grid) || p.grid < 4) throw InvalidArgument("KS grid must be a power of two >= 4");
          if (!(p.length > 0.0) || !std::isfinite(p.length)) throw InvalidArgument("KS domain length must be positive");
        }
      },
      params_);
}

SystemKind SystemSpec::kind() const noexcept {
  switch (params_.index()) {
    case 0: return SystemKind::l63;
    case 1: return SystemKind::l96;
    default: return SystemKind::ks;
  }
}

std::size_t SystemSpec::dim() const noexcept {
  switch (params_.index()) {
    case 0: return 3;
    case 1: return std::get<L96Params>(params_).sites;
    default: return std::get<KsParams>(params_).grid;
  }
}

void Trajectory::validate() const {
  if (steps < 1) throw FormatError("trajectory has no states");
  if (dim < 1) throw FormatError("trajectory state dimension is zero");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw FormatError("trajectory dt must be positive");
  if (states.size() != steps * dim) throw FormatError("trajectory storage does not match T x m");
  for (double v : states)
    if (!std::isfinite(v)) throw FormatError("trajectory contains non-finite values");
}

State rhs_l63(std::span<const double> u, const L63Params& p) {
  if (u.size() != 3) throw DimensionError("rhs_l63: state must have 3 components");
  return {p.sigma * (u[1] - u[0]), u[0] * (p.rho - u[2]) - u[1], u[0] * u[1] - p.beta * u[2]};
}

void rhs_l96(std::span<const double> u, double forcing, std::span<double> out) {
  const std::size_t m = u.size();
  if (m < 4) throw DimensionError("rhs_l96: needs at least 4 sites");
  if (out.size() != m) throw DimensionError("rhs_l96: output size mismatch");
  for (std::size_t i = 0; i < m; ++i) {
    const double up1 = u[(i + 1) % m];
    const double um1 = u[(i + m - 1) % m];
    const double um2 = u[(i + m - 2) % m];
    out[i] = (up1 - um2) * um1 - u[i] + forcing;
  }
}

State rhs_l96(std::span<const double> u, double forcing) {
  State out(u.size());
  rhs_l96(u, forcing, out);
  return out;
}

State rk4_step(const OdeRhs& rhs, std::span<const double> u, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be positive");
  const std::size_t n = u.size();
  State k1(n), k2(n), k3(n), k4(n), tmp(n), out(n);
  rhs(u, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
  rhs(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
  rhs(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
  rhs(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(out[i])) throw NumericalError("rk4_step: non-finite state component " + std::to_string(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky

EtdCoefficients make_etdrk4_coefficients(std::size_t grid, double length, double dt, int contour_points) {
  if (!is_power_of_two(grid)) throw DimensionError("ETDRK4: grid size must be a power of two");
  if (!(dt > 0.0) || !(length > 0.0)) throw InvalidArgument("ETDRK4: dt and domain length must be positive");
  EtdCoefficients c;
  c.grid = grid;
  c.length = length;
  c.dt = dt;
  const std::size_t bins = grid / 2 + 1;
  for (auto* v : {&c.wavenumber, &c.linear, &c.e, &c.e2, &c.q, &c.f1, &c.f2, &c.f3}) v->assign(bins, 0.0);
  const double h = dt;
  for (std::size_t k = 0; k < bins; ++k) {
    const double q = 2.0 * M_PI * static_cast<double>(k) / length;
    const double lin = q * q - q * q * q * q;
    c.wavenumber[k] = q;
    c.linear[k] = lin;
    c.e[k] = std::exp(h * lin);
    c.e2[k] = std::exp(0.5 * h * lin);
    // Contour means avoid the cancellation in the phi-functions near hL = 0.
    Complex sq(0.0), s1(0.0), s2(0.0), s3(0.0);
    for (int j = 0; j < contour_points; ++j) {
      const double ang = 2.0 * M_PI * (j + 0.5) / contour_points;
      const Complex z = h * lin + Complex(std::cos(ang), std::sin(ang));
      const Complex ez = std::exp(z), ez2 = std::exp(0.5 * z);
      const Complex z3 = z * z * z;
      sq += (ez2 - 1.0) / z;
      s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      s2 += (2.0 + z + ez * (z - 2.0)) / z3;
      s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    const double inv = 1.0 / contour_points;
    c.q[k] = h * (sq * inv).real();
    c.f1[k] = h * (s1 * inv).real();
    c.f2[k] = h * (s2 * inv).real();
    c.f3[k] = h * (s3 * inv).real();
  }
  return c;
}

namespace {

// N(v) = -(i q / 2) FFT((IFFT v)^2); the Nyquist derivative is zeroed.
std::vector<Complex> ks_nonlinear(const std::vector<Complex>& v, const EtdCoefficients& c, double& residue) {
  double r = 0.0;
  auto u = ifft_real(v, c.grid, &r);
  residue = std::max(residue, r);
  for (auto& x : u) x *= x;
  auto w = fft_real(u);
  const std::size_t nyq = c.grid / 2;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double q = (k == nyq) ? 0.0 : c.wavenumber[k];
    w[k] *= Complex(0.0, -0.5 * q);
  }
  return w;
}

}  // namespace

State ks_etdrk4_step(std::span<const double> u, const EtdCoefficients& c, double* imag_residue) {
  if (u.size() != c.grid) throw DimensionError("ks_etdrk4_step: state length does not match coefficients");
  double residue = 0.0;
  const auto v = fft_real(u);
  const std::size_t bins = v.size();
  const auto nv = ks_nonlinear(v, c, residue);
  std::vector<Complex> a(bins), b(bins), cc(bins), out(bins);
  for (std::size_t k = 0; k < bins; ++k) a[k] = c.e2[k] * v[k] + c.q[k] * nv[k];
  const auto na = ks_nonlinear(a, c, residue);
  for (std::size_t k = 0; k < bins; ++k) b[k] = c.e2[k] * v[k] + c.q[k] * na[k];
  const auto nb = ks_nonlinear(b, c, residue);
  for (std::size_t k = 0; k < bins; ++k) cc[k] = c.e2[k] * a[k] + c.q[k] * (2.0 * nb[k] - nv[k]);
  const auto nc = ks_nonlinear(cc, c, residue);
  for (std::size_t k = 0; k < bins; ++k) {
    out[k] = c.e[k] * v[k] + nv[k] * c.f1[k] + 2.0 * (na[k] + nb[k]) * c.f2[k] + nc[k] * c.f3[k];
  }
  double r = 0.0;
  auto next = ifft_real(out, c.grid, &r);
  residue = std::max(residue, r);
  if (imag_residue) *imag_residue = residue;
  for (std::size_t i = 0; i < next.size(); ++i)
    if (!std::isfinite(next[i])) throw NumericalError("ks_etdrk4_step: non-finite state component " + std::to_string(i));
  return next;
}

// ---------------------------------------------------------------------------

StepFn make_step_fn(const SystemSpec& spec, double dt, std::size_t substeps) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (substeps < 1) throw InvalidArgument("substeps must be >= 1");
  const double h = dt / static_cast<double>(substeps);
  if (spec.kind() == SystemKind::ks) {
    const auto& p = std::get<KsParams>(spec.params());
    auto coeffs = std::make_shared<EtdCoefficients>(make_etdrk4_coefficients(p.grid, p.length, h));
    return [coeffs, substeps](State& u) {
      for (std::size_t s = 0; s < substeps; ++s) u = ks_etdrk4_step(u, *coeffs);
    };
  }
  OdeRhs rhs;
  if (spec.kind() == SystemKind::l63) {
    const auto p = std::get<L63Params>(spec.params());
    rhs = [p](std::span<const double> u, std::span<double> du) {
      const auto r = rhs_l63(u, p);
      std::copy(r.begin(), r.end(), du.begin());
    };
  } else {
    const double forcing = std::get<L96Params>(spec.params()).forcing;
    rhs = [forcing](std::span<const double> u, std::span<double> du) { rhs_l96(u, forcing, du); };
  }
  return [rhs, h, substeps](State& u) {
    for (std::size_t s = 0; s < substeps; ++s) u = rk4_step(rhs, u, h);
  };
}

Trajectory simulate(const StepFn& step, SystemKind tag, const State& u0, std::size_t steps, double dt,
                    std::size_t burn_in) {
  if (steps < 1) throw InvalidArgument("simulate: steps must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("simulate: dt must be positive");
  Trajectory traj;
  traj.system = tag;
  traj.dt = dt;
  traj.steps = steps;
  traj.dim = u0.size();
  traj.states.reserve(steps * u0.size());
  State u = u0;
  const std::size_t total = burn_in + steps;
  for (std::size_t s = 0; s < total; ++s) {
    if (s > 0) {
      try {
        step(u);
      } catch (const NumericalError& e) {
        throw BlowUpError("integration failed at stored step " + std::to_string(s) + ": " + e.what(),
                          static_cast<long>(s));
      }
      if (max_abs(u) > kBlowUpThreshold) {
        throw BlowUpError("state blew up (|u| > 1e6) at stored step " + std::to_string(s), static_cast<long>(s));
      }
    }
    if (s >= burn_in) traj.states.insert(traj.states.end(), u.begin(), u.end());
  }
  return traj;
}

Trajectory simulate(const SystemSpec& spec, const State& u0, std::size_t steps, double dt, std::size_t burn_in,
                    std::size_t substeps) {
  if (u0.size() != spec.dim()) throw DimensionError("simulate: initial state has wrong dimension");
  return simulate(make_step_fn(spec, dt, substeps), spec.kind(), u0, steps, dt, burn_in);
}

double pooled_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

Trajectory add_noise(const Trajectory& clean, const NoiseSpec& noise) {
  if (!(noise.level >= 0.0)) throw InvalidArgument("noise level must be >= 0");
  Trajectory out = clean;
  if (noise.level == 0.0) return out;
  const double sd = noise.level * pooled_std(clean.states);
  CounterRng rng(noise.seed, 0x4E4F495345ULL);
  for (auto& v : out.states) v += sd * rng.normal();
  return out;
}

State default_initial_state(const SystemSpec& spec, std::uint64_t seed) {
  CounterRng rng(seed, 0x1C);
  const std::size_t m = spec.dim();
  State u(m);
  switch (spec.kind()) {
    case SystemKind::l63:
      u = {1.0, 1.0, 1.0};
      for (auto& x : u) x += 0.1 * rng.normal();
      break;
    case SystemKind::l96: {
      const double f = std::get<L96Params>(spec.params()).forcing;
      for (auto& x : u) x = f + 0.01 * rng.normal();
      u[0] += 0.01;
      break;
    }
    case SystemKind::ks: {
      const auto& p = std::get<KsParams>(spec.params());
      for (std::size_t i = 0; i < m; ++i) {
        const double x = p.length * static_cast<double>(i) / static_cast<double>(m);
        const double w = 2.0 * M_PI / p.length;
        u[i] = std::cos(w * x) * (1.0 + std::sin(w * x)) + 0.01 * rng.normal();
      }
      break;
    }
    case SystemKind::generic:
      for (auto& x : u) x = rng.normal();
      break;
  }
  return u;
}

}  // namespace chaosot
