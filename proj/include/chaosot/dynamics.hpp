#pragma once

// Ground-truth simulators: Lorenz-63, Lorenz-96 (RK4) and Kuramoto-Sivashinsky
// (ETDRK4 pseudo-spectral), plus observation noise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "chaosot/fft.hpp"

namespace chaosot {

enum class SystemKind : std::uint8_t { generic = 0, l63 = 1, l96 = 2, ks = 3 };

std::string to_string(SystemKind kind);
SystemKind parse_system_kind(const std::string& name);

struct L63Params {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

struct L96Params {
  std::size_t sites = 60;
  double forcing = 10.0;
};

struct KsParams {
  std::size_t grid = 256;
  double length = 32.0 * M_PI;
};

class SystemSpec {
 public:
  using Variant = std::variant<L63Params, L96Params, KsParams>;

  explicit SystemSpec(Variant params);
  static SystemSpec lorenz63(L63Params p = {}) { return SystemSpec(p); }
  static SystemSpec lorenz96(std::size_t sites, double forcing) { return SystemSpec(L96Params{sites, forcing}); }
  static SystemSpec kuramoto_sivashinsky(std::size_t grid, double length) { return SystemSpec(KsParams{grid, length}); }

  SystemKind kind() const noexcept;
  std::size_t dim() const noexcept;
  const Variant& params() const noexcept { return params_; }

 private:
  Variant params_;
};

using State = std::vector<double>;

/// Time-major sequence of states: states[t * dim + i].
struct Trajectory {
  SystemKind system = SystemKind::generic;
  double dt = 1.0;
  std::size_t steps = 0;  // T
  std::size_t dim = 0;    // m
  std::vector<double> states;

  std::span<const double> row(std::size_t t) const { return {states.data() + t * dim, dim}; }
  std::span<double> row(std::size_t t) { return {states.data() + t * dim, dim}; }
  void validate() const;
};

State rhs_l63(std::span<const double> u, const L63Params& p);
State rhs_l96(std::span<const double> u, double forcing);
void rhs_l96(std::span<const double> u, double forcing, std::span<double> out);

using OdeRhs = std::function<void(std::span<const double> u, std::span<double> du)>;

/// Classical fourth-order Runge-Kutta step.
State rk4_step(const OdeRhs& rhs, std::span<const double> u, double dt);

/// Precomputed ETDRK4 coefficients for u_t = -u u_x - u_xx - u_xxxx on a
/// periodic domain of length L, one entry per real-FFT bin.
struct EtdCoefficients {
  std::size_t grid = 0;
  double length = 0.0;
  double dt = 0.0;
  std::vector<double> wavenumber;  // q_k = 2 pi k / L
  std::vector<double> linear;      // q^2 - q^4
  std::vector<double> e, e2;       // exp(h L), exp(h L / 2)
  std::vector<double> q, f1, f2, f3;
};

EtdCoefficients make_etdrk4_coefficients(std::size_t grid, double length, double dt, int contour_points = 32);

/// One ETDRK4 step. `imag_residue` receives the largest imaginary part
/// discarded by the inverse transforms.
State ks_etdrk4_step(std::span<const double> u, const EtdCoefficients& c, double* imag_residue = nullptr);

/// Advances one stored step of length dt in place.
using StepFn = std::function<void(State&)>;

/// Stepper for a system: RK4 substeps for ODEs, ETDRK4 substeps for KS.
StepFn make_step_fn(const SystemSpec& spec, double dt, std::size_t substeps);

constexpr double kBlowUpThreshold = 1e6;

/// Integrates from u0, discards `burn_in` stored steps, and returns `steps` states.
Trajectory simulate(const SystemSpec& spec, const State& u0, std::size_t steps, double dt, std::size_t burn_in,
                    std::size_t substeps);

/// Same as simulate for an arbitrary stepper.
Trajectory simulate(const StepFn& step, SystemKind tag, const State& u0, std::size_t steps, double dt,
                    std::size_t burn_in);

struct NoiseSpec {
  double level = 0.0;
  std::uint64_t seed = 0;
};

/// Pooled (all-entries) population standard deviation.
double pooled_std(std::span<const double> values);

/// Adds i.i.d. N(0, (level * pooled_std(clean))^2) to every entry.
Trajectory add_noise(const Trajectory& clean, const NoiseSpec& noise);

/// A reasonable default initial condition for each system.
State default_initial_state(const SystemSpec& spec, std::uint64_t seed);

}  // namespace chaosot
