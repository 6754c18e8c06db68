#pragma once

// The four training methods: No-OT, Fixed-OT, learnable Sinkhorn and
// learnable WGAN, with teacher forcing and adversarial alternation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/dynamics.hpp"
#include "chaosot/lipschitz.hpp"
#include "chaosot/models.hpp"
#include "chaosot/ot.hpp"

namespace chaosot {

enum class Method { no_ot, fixed_ot, sinkhorn, wgan };

std::string to_string(Method m);
/// Accepts both "no-ot" and "no_ot" spellings.
Method parse_method(const std::string& name);

struct TrainConfig {
  Method method = Method::no_ot;
  SystemKind system = SystemKind::generic;
  double ks_length = 32.0 * M_PI;

  // Emulator architecture.
  std::string emulator = "mlp";  // mlp | conv | linear
  std::size_t emulator_width = 128;
  std::size_t emulator_depth = 4;  // hidden layers (mlp) or conv layers
  std::size_t conv_channels = 16;
  std::size_t conv_radius = 2;
  ad::Activation emulator_activation = ad::Activation::gelu;
  bool emulator_residual = true;

  // Summary and critic networks.
  std::size_t summary_width = 128;
  std::size_t summary_depth = 2;  // 0 gives a single linear layer
  std::size_t summary_dim = 3;    // d
  ad::Activation summary_activation = ad::Activation::relu;
  std::size_t critic_width = 64;

  // OT term.
  double lambda = 1.0;
  double epsilon = 0.02;
  bool epsilon_relative = false;
  double p = 2.0;
  int sinkhorn_iters = 200;
  double sinkhorn_tol = 1e-9;
  double sinkhorn_anneal = 0.5;
  std::size_t ot_points = 256;

  // Schedule.
  std::size_t window = 100;
  std::size_t stride = 2;
  std::size_t batch_windows = 4;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 0;  // 0: one pass over all windows
  std::optional<std::size_t> warmup_epochs;  // unset: 10% of epochs
  std::size_t adversary_steps = 1;
  double early_stop_fraction = 0.7;

  // Optimisation.
  double lr = 1e-3;
  double adversary_lr = 1e-3;
  double momentum = 0.0;
  double grad_clip = 1.0;  // 0 disables
  double critic_clip = 0.01;
  double summary_clip = 0.1;  // 0 disables

  // Optional Lipschitz regularizer on the summary network.
  double lip_weight = 0.0;
  double lip_min = 0.0;
  double lip_max = 10.0;
  double lip_beta = 50.0;

  std::uint64_t seed = 0;

  std::size_t resolved_warmup() const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mse = 0.0;
  double ot = 0.0;
  double adversary = 0.0;
  double lip_upper = 0.0;
  double lip_lower = 0.0;
  double critic_max_abs = 0.0;
  double summary_max_abs = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string csv() const;
};

/// Start indices of sliding windows of length `window` with the given stride.
std::vector<std::size_t> teacher_forced_windows(const Trajectory& traj, std::size_t window, std::size_t stride);

/// (input, target) pairs: inputs at even window offsets, targets one step later.
struct PairBatch {
  Tensor inputs;   // [P x m]
  Tensor targets;  // [P x m]
  std::vector<std::size_t> input_index;  // source time index of each input
};

PairBatch make_pairs(const Trajectory& traj, std::span<const std::size_t> starts, std::size_t window);

/// Mean one-step squared error over the batch.
ad::Var mse_objective(const Model& emulator, std::span<const ad::Var> params, ad::Var inputs, ad::Var targets);

struct Clouds {
  ad::Var truth;
  ad::Var pred;
};

/// Summary of the targets and of the predictions, subsampled with the same
/// seeded row set to at most n_points rows each.
Clouds build_clouds(ad::Var true_points, ad::Var pred_points, std::size_t n_points, std::uint64_t seed);

ad::Var sinkhorn_ot_term(const Clouds& clouds, double epsilon, double p, const SinkhornOptions& base);
/// mean phi(truth) - mean phi(pred).
ad::Var wgan_ot_term(const Model& critic, std::span<const ad::Var> critic_params, const Clouds& clouds);

/// Gradient step on every parameter (descent, or ascent when `ascend`),
/// after rescaling the gradient to global norm <= clip (clip > 0).
/// Returns the global gradient norm before clipping.
double apply_gradient(Model& model, std::span<const Tensor> grads, double lr, double clip, bool ascend,
                      std::vector<std::vector<double>>* velocity = nullptr, double momentum = 0.0);

struct TrainResult {
  Model emulator;
  std::optional<Model> summary;
  std::optional<Model> critic;
  TrainLog log;
};

/// Builds the emulator / summary / critic for a config and a state dimension.
Model make_emulator(const TrainConfig& cfg, std::size_t m, std::uint64_t seed);
Model make_summary(const TrainConfig& cfg, std::size_t m, std::uint64_t seed);
Model make_critic(const TrainConfig& cfg, std::uint64_t seed);

/// Runs warm-up then adversarial alternation. `initial` overrides the default
/// emulator initialisation when given.
TrainResult train(const TrainConfig& cfg, const Trajectory& data, const Model* initial = nullptr);

/// One adversary ascent step on a fixed pair batch (exposed for tests).
/// Returns the OT term before the step.
double adversary_step(const TrainConfig& cfg, const Model& emulator, Model& summary, Model* critic,
                      const PairBatch& batch, double dt, std::uint64_t cloud_seed);

}  // namespace chaosot
