#pragma once

// Evaluation metrics, fixed handcrafted summaries and Lyapunov estimation.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/dynamics.hpp"
#include "chaosot/linalg.hpp"
#include "chaosot/models.hpp"
#include "chaosot/ot.hpp"

namespace chaosot {

/// Mean over rows of |target_t - pred_t| / |target_t|, rows of length m.
double relative_rmse(std::span<const double> preds, std::span<const double> targets, std::size_t m);

/// Time-average of the relative L1 error between energy spectra.
double spectral_distance(const Trajectory& truth, const Trajectory& pred);

/// Spectral differentiation matrix of order 1 or 2 on a periodic grid.
Tensor spectral_derivative_matrix(std::size_t m, double length, int order);

/// Handcrafted d = 3 summary per site and interior time (central time
/// differences): L96 (du/dt, advection, u); KS (du/dt, u_x, u_xx). L63 uses
/// its three coordinates as one point per interior time.
PointCloud fixed_summary_cloud(const Trajectory& traj, double ks_length = 0.0);

/// Differentiable fixed summary of predicted states given their inputs;
/// du/dt is the one-step forward difference (pred - input) / dt.
/// inputs, preds: [B x m] -> [(B * m) x 3] (L63: [B x 3]).
ad::Var fixed_summary_on_tape(SystemKind system, ad::Var inputs, ad::Var preds, double dt, double ks_length);

/// Mean over components of the L1 distance between normalized 1D
/// histograms binned on the true cloud's range.
double l1_hist_error(const PointCloud& truth, const PointCloud& pred, std::size_t bins = 64);

struct BenettinOptions {
  double d0 = 1e-2;
  double band_lo = 1e-5;
  double band_hi = 10.0;
  std::size_t horizon = 1000;
  std::size_t warmup = 100;
  double dt = 0.1;
  std::uint64_t seed = 0;
  /// Also count the growth of the open segment at the end of the window.
  bool count_final_segment = true;
};

struct BenettinResult {
  double lle = 0.0;
  std::size_t rescalings = 0;
};

BenettinResult benettin_lle(const StepFn& step, const State& u0, const BenettinOptions& options);

/// Step function that applies a trained emulator.
StepFn model_step_fn(const Model& model);

/// Autoregressive rollout from u0 returning `steps` states (u0 included).
Trajectory rollout(const Model& model, const State& u0, std::size_t steps, double dt, SystemKind tag);

struct DisplacementCovariance {
  Tensor matrix;  // d x d
  SymmetricEigen eigen;
  std::vector<std::size_t> assignment;
  double ot_cost = 0.0;
};

DisplacementCovariance displacement_covariance(const PointCloud& x, const PointCloud& y);

/// Monte-Carlo estimate of E[|Z|^p]^(1/p), Z ~ N(0, I_d).
double gaussian_kappa(double p, std::size_t d, std::size_t n_samples, std::uint64_t seed);

struct MetricRow {
  std::string metric;
  std::string setting;
  double value = 0.0;
};

std::string metrics_csv(std::span<const MetricRow> rows);

}  // namespace chaosot
