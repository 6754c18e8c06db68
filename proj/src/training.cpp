#include "chaosot/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "chaosot/error.hpp"
#include "chaosot/metrics.hpp"
#include "chaosot/rng.hpp"

namespace chaosot {

using ad::Tape;
using ad::Var;

std::string to_string(Method m) {
  switch (m) {
    case Method::no_ot: return "no-ot";
    case Method::fixed_ot: return "fixed-ot";
    case Method::sinkhorn: return "sinkhorn";
    case Method::wgan: return "wgan";
  }
  return "no-ot";
}

Method parse_method(const std::string& name) {
  if (name == "no-ot" || name == "no_ot") return Method::no_ot;
  if (name == "fixed-ot" || name == "fixed_ot") return Method::fixed_ot;
  if (name == "sinkhorn") return Method::sinkhorn;
  if (name == "wgan") return Method::wgan;
  throw InvalidArgument("unknown method '" + name + "' (expected no-ot, fixed-ot, sinkhorn or wgan)");
}

std::size_t TrainConfig::resolved_warmup() const {
  return warmup_epochs ? *warmup_epochs : epochs / 10;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (window < 2) throw InvalidArgument("window must be >= 2");
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  if (!(early_stop_fraction > 0.0 && early_stop_fraction <= 1.0))
    throw InvalidArgument("early_stop_fraction must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(p >= 1.0)) throw InvalidArgument("p must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_windows < 1) throw InvalidArgument("batch_windows must be >= 1");
  if (ot_points < 1) throw InvalidArgument("ot_points must be >= 1");
  if (sinkhorn_iters < 1) throw InvalidArgument("sinkhorn_iters must be >= 1");
  if (!(sinkhorn_anneal >= 0.0 && sinkhorn_anneal < 1.0)) throw InvalidArgument("sinkhorn_anneal must lie in [0, 1)");
  if (!(lr > 0.0) || !(adversary_lr > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw InvalidArgument("grad_clip must be >= 0");
  if (!(critic_clip > 0.0)) throw InvalidArgument("critic_clip must be positive");
  if (!(summary_clip >= 0.0)) throw InvalidArgument("summary_clip must be >= 0");
  if (emulator != "mlp" && emulator != "conv" && emulator != "linear")
    throw InvalidArgument("emulator must be mlp, conv or linear");
  if (summary_dim < 1) throw InvalidArgument("summary_dim must be >= 1");
  if (lip_weight < 0.0) throw InvalidArgument("lip_weight must be >= 0");
  if (lip_weight > 0.0 && !(lip_min >= 0.0 && lip_min < lip_max && lip_beta > 0.0))
    throw InvalidArgument("Lipschitz regularizer needs 0 <= lip_min < lip_max and lip_beta > 0");
  if (resolved_warmup() > epochs) throw InvalidArgument("warmup_epochs exceeds epochs");
}

std::string TrainLog::csv() const {
  std::ostringstream out;
  out << "epoch,mse,ot,adversary,lip_upper,lip_lower,critic_max_abs,summary_max_abs,seconds\n";
  char buf[512];
  for (const auto& r : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.6g,%.6g,%.6g,%.6g,%.3f\n", r.epoch, r.mse, r.ot,
                  r.adversary, r.lip_upper, r.lip_lower, r.critic_max_abs, r.summary_max_abs, r.seconds);
    out << buf;
  }
  return out.str();
}

std::vector<std::size_t> teacher_forced_windows(const Trajectory& traj, std::size_t window, std::size_t stride) {
  if (window < 2 || stride < 1) throw InvalidArgument("teacher forcing: window >= 2 and stride >= 1 required");
  if (window > traj.steps)
    throw InvalidArgument("teacher forcing: window " + std::to_string(window) + " exceeds trajectory length " +
                          std::to_string(traj.steps));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= traj.steps; s += stride) starts.push_back(s);
  return starts;
}

PairBatch make_pairs(const Trajectory& traj, std::span<const std::size_t> starts, std::size_t window) {
  if (starts.empty()) throw InvalidArgument("make_pairs: no windows");
  const std::size_t m = traj.dim;
  std::vector<double> in, out;
  PairBatch b;
  for (auto s : starts) {
    if (s + window > traj.steps) throw InvalidArgument("make_pairs: window runs past the trajectory");
    for (std::size_t o = 0; o + 1 < window; o += 2) {
      const auto u = traj.row(s + o), v = traj.row(s + o + 1);
      in.insert(in.end(), u.begin(), u.end());
      out.insert(out.end(), v.begin(), v.end());
      b.input_index.push_back(s + o);
    }
  }
  const std::size_t n = b.input_index.size();
  b.inputs = Tensor({n, m}, std::move(in));
  b.targets = Tensor({n, m}, std::move(out));
  return b;
}

Var mse_objective(const Model& emulator, std::span<const Var> params, Var inputs, Var targets) {
  if (inputs.shape().empty() || inputs.shape()[0] == 0) throw InvalidArgument("mse_objective: empty batch");
  return ad::mse(emulator_forward(emulator, params, inputs), targets);
}

Clouds build_clouds(Var true_points, Var pred_points, std::size_t n_points, std::uint64_t seed) {
  if (true_points.shape() != pred_points.shape() || true_points.shape().size() != 2)
    throw DimensionError("build_clouds: summary clouds must be matching [N x d]");
  const std::size_t n = true_points.shape()[0];
  if (n == 0) throw InvalidArgument("build_clouds: empty batch");
  if (n_points >= n) return {true_points, pred_points};
  CounterRng rng(seed, 0x434C4F5544ULL);
  auto rows = sample_without_replacement(n, n_points, rng);
  std::sort(rows.begin(), rows.end());
  return {ad::gather_rows(true_points, rows), ad::gather_rows(pred_points, rows)};
}

Var sinkhorn_ot_term(const Clouds& clouds, double epsilon, double p, const SinkhornOptions& base) {
  SinkhornOptions o = base;
  o.epsilon = epsilon;
  return sinkhorn_divergence(clouds.truth, clouds.pred, p, o);
}

Var wgan_ot_term(const Model& critic, std::span<const Var> critic_params, const Clouds& clouds) {
  Var a = ad::mean(critic_forward(critic, critic_params, clouds.truth));
  Var b = ad::mean(critic_forward(critic, critic_params, clouds.pred));
  return ad::sub(a, b);
}

double apply_gradient(Model& model, std::span<const Tensor> grads, double lr, double clip, bool ascend,
                      std::vector<std::vector<double>>* velocity, double momentum) {
  if (grads.size() != model.params.size()) throw DimensionError("apply_gradient: gradient count mismatch");
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.values()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient");
  const double factor = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  const double sign = ascend ? 1.0 : -1.0;
  if (velocity && velocity->size() != grads.size()) {
    velocity->assign(grads.size(), {});
    for (std::size_t k = 0; k < grads.size(); ++k) (*velocity)[k].assign(grads[k].size(), 0.0);
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto v = model.params[k].data();
    const auto g = grads[k].values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double step = factor * g[i];
      if (velocity && momentum > 0.0) {
        auto& vel = (*velocity)[k][i];
        vel = momentum * vel + step;
        step = vel;
      }
      v[i] += sign * lr * step;
    }
    model.params[k] = Tensor(model.params[k].shape(), std::move(v));
  }
  return norm;
}

Model make_emulator(const TrainConfig& cfg, std::size_t m, std::uint64_t seed) {
  ModelSpec spec;
  if (cfg.emulator == "linear") {
    spec = linear_spec(m, cfg.emulator_residual);
  } else if (cfg.emulator == "conv") {
    std::vector<std::size_t> ch{1};
    for (std::size_t l = 0; l + 1 < cfg.emulator_depth; ++l) ch.push_back(cfg.conv_channels);
    ch.push_back(1);
    spec = conv_spec(m, ch, cfg.conv_radius, cfg.emulator_activation, cfg.emulator_residual);
  } else {
    std::vector<std::size_t> w{m};
    for (std::size_t l = 0; l < cfg.emulator_depth; ++l) w.push_back(cfg.emulator_width);
    w.push_back(m);
    spec = mlp_spec(w, cfg.emulator_activation, cfg.emulator_residual);
  }
  spec.system = cfg.system;
  spec.state_dim = m;
  Model model = init_model(spec, seed);
  if (cfg.emulator_residual && cfg.emulator != "linear") zero_last_layer(model);
  return model;
}

Model make_summary(const TrainConfig& cfg, std::size_t m, std::uint64_t seed) {
  // One point per site for spatial systems, one point per state for L63.
  const std::size_t rows = cfg.system == SystemKind::l63 ? 1 : m;
  const std::size_t out = rows * cfg.summary_dim;
  ModelSpec spec;
  if (cfg.summary_depth == 0) {
    spec = linear_spec(m, out, rows);
  } else {
    std::vector<std::size_t> w{m};
    for (std::size_t l = 0; l < cfg.summary_depth; ++l) w.push_back(cfg.summary_width);
    w.push_back(out);
    spec = mlp_spec(w, cfg.summary_activation, false, rows);
  }
  spec.system = cfg.system;
  Model model = init_model(spec, seed);
  if (cfg.summary_clip > 0.0) clip_weights(model, cfg.summary_clip);
  return model;
}

Model make_critic(const TrainConfig& cfg, std::uint64_t seed) {
  Model model = init_model(mlp_spec({cfg.summary_dim, cfg.critic_width, 1}, ad::Activation::relu), seed);
  clip_weights(model, cfg.critic_clip);
  return model;
}

namespace {

std::vector<Tensor> grads_of(const Tape& tape, std::span<const Var> params) {
  std::vector<Tensor> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(tape.grad(p));
  return g;
}

SinkhornOptions sinkhorn_options(const TrainConfig& cfg) {
  SinkhornOptions o;
  o.epsilon = cfg.epsilon;
  o.max_iter = cfg.sinkhorn_iters;
  o.tol = cfg.sinkhorn_tol;
  o.anneal = cfg.sinkhorn_anneal;
  return o;
}

double absolute_epsilon(const TrainConfig& cfg, const Clouds& c) {
  if (!cfg.epsilon_relative) return cfg.epsilon;
  const auto cost = pairwise_cost(PointCloud::from_tensor(c.truth.value()), PointCloud::from_tensor(c.pred.value()),
                                  cfg.p);
  const double mc = mean_cost(cost);
  return mc > 0.0 ? cfg.epsilon * mc : cfg.epsilon;
}

// Summary clouds for the batch. Fixed-OT uses the handcrafted map; the
// learnable methods apply the summary network.
Clouds clouds_for(const TrainConfig& cfg, Var inputs, Var targets, Var preds, const Model* summary,
                  std::span<const Var> summary_params, double dt, std::uint64_t seed) {
  Var t, p;
  if (cfg.method == Method::fixed_ot) {
    t = fixed_summary_on_tape(cfg.system, inputs, targets, dt, cfg.ks_length);
    p = fixed_summary_on_tape(cfg.system, inputs, preds, dt, cfg.ks_length);
  } else {
    t = summary_forward(*summary, summary_params, targets);
    p = summary_forward(*summary, summary_params, preds);
  }
  return build_clouds(t, p, cfg.ot_points, seed);
}

std::vector<std::vector<double>> sample_states(const Tensor& states, std::size_t k) {
  const std::size_t n = states.extent(0), m = states.extent(1);
  std::vector<std::vector<double>> out;
  const std::size_t take = std::min(n, k);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t r = i * n / take;
    out.emplace_back(states.data().begin() + static_cast<long>(r * m),
                     states.data().begin() + static_cast<long>((r + 1) * m));
  }
  return out;
}

}  // namespace

double adversary_step(const TrainConfig& cfg, const Model& emulator, Model& summary, Model* critic,
                      const PairBatch& batch, double, std::uint64_t cloud_seed) {
  Tape tape;
  auto ep = bind(tape, emulator, false);
  auto sp = bind(tape, summary, true);
  std::vector<Var> cp;
  if (cfg.method == Method::wgan) {
    if (!critic) throw InvalidArgument("adversary_step: WGAN needs a critic");
    cp = bind(tape, *critic, true);
  }
  Var x = tape.constant(batch.inputs), y = tape.constant(batch.targets);
  Var pred = tape.constant(emulator_forward(emulator, ep, x).value());
  Var tp = summary_forward(summary, sp, y), pp = summary_forward(summary, sp, pred);
  Clouds c = build_clouds(tp, pp, cfg.ot_points, cloud_seed);
  Var term = cfg.method == Method::wgan ? wgan_ot_term(*critic, cp, c)
                                        : sinkhorn_ot_term(c, absolute_epsilon(cfg, c), cfg.p, sinkhorn_options(cfg));
  Var objective = term;
  if (cfg.lip_weight > 0.0) {
    const auto states = sample_states(batch.targets, 4);
    HingeReg reg{cfg.lip_min, cfg.lip_max, cfg.lip_beta};
    objective = ad::sub(term, ad::scale(hinge_lip_reg(summary, sp, states, reg), cfg.lip_weight));
  }
  const double value = term.value().item();
  if (!std::isfinite(objective.value().item())) throw NumericalError("adversary objective is not finite");
  tape.backward(objective);
  apply_gradient(summary, grads_of(tape, sp), cfg.adversary_lr, cfg.grad_clip, true);
  if (cfg.summary_clip > 0.0) clip_weights(summary, cfg.summary_clip);
  if (critic) {
    apply_gradient(*critic, grads_of(tape, cp), cfg.adversary_lr, cfg.grad_clip, true);
    clip_weights(*critic, cfg.critic_clip);
  }
  return value;
}

TrainResult train(const TrainConfig& cfg, const Trajectory& data, const Model* initial) {
  cfg.validate();
  data.validate();
  const std::size_t m = data.dim;
  const double dt = data.dt;
  const bool learnable = cfg.method == Method::sinkhorn || cfg.method == Method::wgan;
  const bool use_ot = cfg.method != Method::no_ot && cfg.lambda > 0.0;

  TrainResult res;
  res.emulator = initial ? *initial : make_emulator(cfg, m, splitmix64(cfg.seed ^ 0xE1));
  if (res.emulator.spec.input_dim() != m) throw DimensionError("train: emulator does not match the data dimension");
  if (learnable) res.summary = make_summary(cfg, m, splitmix64(cfg.seed ^ 0x5A));
  if (cfg.method == Method::wgan) res.critic = make_critic(cfg, splitmix64(cfg.seed ^ 0xC7));

  const auto starts = teacher_forced_windows(data, cfg.window, cfg.stride);
  CounterRng order_rng(cfg.seed, 0x4F52444552ULL);
  std::uint64_t cloud_counter = 0;
  std::vector<std::vector<double>> velocity;
  const std::size_t warmup = cfg.resolved_warmup();
  const double adversary_cutoff = cfg.early_stop_fraction * static_cast<double>(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(starts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, order_rng);
    std::size_t steps = (order.size() + cfg.batch_windows - 1) / cfg.batch_windows;
    if (cfg.steps_per_epoch > 0) steps = std::min(steps, cfg.steps_per_epoch);

    const bool ot_active = use_ot && epoch >= warmup;
    const bool adversary_active =
        ot_active && learnable && !(cfg.method == Method::sinkhorn && static_cast<double>(epoch) >= adversary_cutoff);

    EpochRecord rec;
    rec.epoch = epoch;
    PairBatch last;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> chosen;
      for (std::size_t k = s * cfg.batch_windows; k < std::min(order.size(), (s + 1) * cfg.batch_windows); ++k)
        chosen.push_back(starts[order[k]]);
      PairBatch batch = make_pairs(data, chosen, cfg.window);
      const std::uint64_t cloud_seed = splitmix64(cfg.seed + (++cloud_counter));

      try {
        if (adversary_active) {
          for (std::size_t k = 0; k < cfg.adversary_steps; ++k) {
            rec.adversary += adversary_step(cfg, res.emulator, *res.summary, res.critic ? &*res.critic : nullptr,
                                            batch, dt, splitmix64(cloud_seed + k + 1)) /
                             static_cast<double>(steps * cfg.adversary_steps);
          }
        }

        Tape tape;
        auto ep = bind(tape, res.emulator, true);
        Var x = tape.constant(batch.inputs), y = tape.constant(batch.targets);
        Var pred = emulator_forward(res.emulator, ep, x);
        Var mse = ad::mse(pred, y);
        Var loss = mse;
        double ot_value = 0.0;
        if (ot_active) {
          std::vector<Var> sp, cp;
          if (res.summary) sp = bind(tape, *res.summary, false);
          if (res.critic) cp = bind(tape, *res.critic, false);
          Clouds c = clouds_for(cfg, x, y, pred, res.summary ? &*res.summary : nullptr, sp, dt, cloud_seed);
          Var term = cfg.method == Method::wgan
                         ? wgan_ot_term(*res.critic, cp, c)
                         : sinkhorn_ot_term(c, absolute_epsilon(cfg, c), cfg.p, sinkhorn_options(cfg));
          ot_value = term.value().item();
          loss = ad::add(mse, ad::scale(term, cfg.lambda));
        }
        if (!std::isfinite(loss.value().item())) throw NumericalError("loss is not finite");
        tape.backward(loss);
        apply_gradient(res.emulator, grads_of(tape, ep), cfg.lr, cfg.grad_clip, false, &velocity, cfg.momentum);
        rec.mse += mse.value().item() / static_cast<double>(steps);
        rec.ot += ot_value / static_cast<double>(steps);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged in epoch " + std::to_string(epoch) + " (last good epoch " +
                             (epoch == 0 ? std::string("none") : std::to_string(epoch - 1)) + "): " + e.what());
      }
      last = std::move(batch);
    }
    if (res.summary) {
      const auto states = sample_states(last.targets, 8);
      rec.lip_upper = lipschitz_upper(*res.summary);
      rec.lip_lower = lipschitz_lower(*res.summary, states, LowerMode::mean, 50);
      rec.summary_max_abs = max_abs_param(*res.summary);
    }
    if (res.critic) rec.critic_max_abs = max_abs_param(*res.critic);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.epochs.push_back(rec);
  }
  return res;
}

}  // namespace chaosot
