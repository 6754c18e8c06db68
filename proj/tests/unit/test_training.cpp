#include <cmath>

#include "chaosot/config.hpp"
#include "chaosot/error.hpp"
#include "chaosot/rng.hpp"
#include "chaosot/training.hpp"
#include "doctest.h"

using namespace chaosot;

namespace {

Trajectory l96_data(std::size_t steps) {
  const auto spec = SystemSpec::lorenz96(8, 8.0);
  return simulate(spec, default_initial_state(spec, 1), steps, 0.05, 100, 1);
}

TrainConfig tiny(Method method) {
  TrainConfig c = preset(SystemKind::l96, method);
  c.epochs = 3;
  c.warmup_epochs = 1;
  c.steps_per_epoch = 3;
  c.window = 10;
  c.batch_windows = 2;
  c.conv_channels = 4;
  c.summary_width = 8;
  c.critic_width = 8;
  c.ot_points = 24;
  c.sinkhorn_iters = 30;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("sliding windows") {
  Trajectory t = l96_data(10);
  CHECK(teacher_forced_windows(t, 4, 2) == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(teacher_forced_windows(t, 10, 3) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(teacher_forced_windows(t, 11, 1), InvalidArgument);
  CHECK_THROWS_AS(teacher_forced_windows(t, 1, 1), InvalidArgument);
}

TEST_CASE("pairs are anchored at even offsets of each window") {
  Trajectory t = l96_data(12);
  const std::vector<std::size_t> starts{0, 5};
  PairBatch b = make_pairs(t, starts, 5);
  CHECK(b.input_index == std::vector<std::size_t>{0, 2, 5, 7});
  CHECK(b.inputs.shape() == Shape{4, 8});
  CHECK(b.targets.at(3, 2) == t.row(8)[2]);
  CHECK(b.inputs.at(2, 0) == t.row(5)[0]);
}

TEST_CASE("gradient clipping bounds the applied update") {
  Model m = init_model(linear_spec(2), 1);
  const Model before = m;
  std::vector<Tensor> g{Tensor::matrix(2, 2, {6, 0, 0, 8}), Tensor::vector({0, 0})};
  const double norm = apply_gradient(m, g, 0.01, 1.0, false);
  CHECK(norm == doctest::Approx(10.0));
  double sq = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < m.params[k].size(); ++i) sq += std::pow(m.params[k][i] - before.params[k][i], 2);
  CHECK(std::abs(std::sqrt(sq) - 0.01) < 1e-9);
  CHECK(m.params[0][0] < before.params[0][0]);
  Model up = before;
  apply_gradient(up, g, 0.01, 0.0, true);
  CHECK(up.params[0][0] == doctest::Approx(before.params[0][0] + 0.06));
}

TEST_CASE("momentum accumulates velocity") {
  Model m = init_model(linear_spec(1), 2);
  const double w0 = m.params[0][0];
  std::vector<Tensor> g{Tensor::matrix(1, 1, {1.0}), Tensor::vector({0.0})};
  std::vector<std::vector<double>> vel;
  apply_gradient(m, g, 0.1, 0.0, false, &vel, 0.5);
  apply_gradient(m, g, 0.1, 0.0, false, &vel, 0.5);
  CHECK(m.params[0][0] == doctest::Approx(w0 - 0.1 - 0.15));
}

TEST_CASE("clouds share one subsample of rows") {
  ad::Tape tape;
  std::vector<double> a(40), b(40);
  for (std::size_t i = 0; i < 40; ++i) {
    a[i] = double(i);
    b[i] = 1000.0 + double(i);
  }
  Clouds c = build_clouds(tape.constant(Tensor({20, 2}, a)), tape.constant(Tensor({20, 2}, b)), 7, 3);
  REQUIRE(c.truth.shape() == Shape{7, 2});
  for (std::size_t r = 0; r < 7; ++r) CHECK(c.pred.value().at(r, 0) - c.truth.value().at(r, 0) == 1000.0);
  Clouds all = build_clouds(tape.constant(Tensor({20, 2}, a)), tape.constant(Tensor({20, 2}, b)), 50, 3);
  CHECK(all.truth.shape() == Shape{20, 2});
}

TEST_CASE("adversary ascent increases the Sinkhorn term") {
  TrainConfig cfg = tiny(Method::sinkhorn);
  cfg.adversary_lr = 1e-2;
  cfg.grad_clip = 0.0;
  Trajectory t = l96_data(40);
  Model emulator = make_emulator(cfg, 8, 1);
  emulator.params.back() = Tensor::filled(emulator.params.back().shape(), 0.3);
  Model summary = make_summary(cfg, 8, 2);
  const std::vector<std::size_t> starts{0, 10};
  PairBatch batch = make_pairs(t, starts, 10);
  const double before = adversary_step(cfg, emulator, summary, nullptr, batch, t.dt, 7);
  const double after = adversary_step(cfg, emulator, summary, nullptr, batch, t.dt, 7);
  CHECK(after > before);
  CHECK(max_abs_param(summary) <= cfg.summary_clip);
}

TEST_CASE("WGAN critic stays within its clip") {
  TrainConfig cfg = tiny(Method::wgan);
  TrainResult r = train(cfg, l96_data(60));
  REQUIRE(r.critic.has_value());
  CHECK(max_abs_param(*r.critic) <= cfg.critic_clip);
  CHECK(r.log.epochs.size() == 3);
  CHECK(r.log.epochs[0].ot == 0.0);
  CHECK(r.log.epochs[2].ot != 0.0);
}

TEST_CASE("training is deterministic for every method") {
  for (Method m : {Method::no_ot, Method::fixed_ot, Method::sinkhorn, Method::wgan}) {
    const TrainConfig cfg = tiny(m);
    const Trajectory data = l96_data(60);
    TrainResult a = train(cfg, data), b = train(cfg, data);
    for (std::size_t k = 0; k < a.emulator.params.size(); ++k)
      CHECK(a.emulator.params[k].data() == b.emulator.params[k].data());
    CHECK(a.log.epochs.back().mse == b.log.epochs.back().mse);
  }
}

TEST_CASE("MSE training decreases the one-step error") {
  TrainConfig cfg = tiny(Method::no_ot);
  cfg.epochs = 20;
  cfg.steps_per_epoch = 5;
  cfg.lr = 0.01;
  cfg.momentum = 0.9;
  TrainResult r = train(cfg, l96_data(200));
  CHECK(r.log.epochs.back().mse < 0.5 * r.log.epochs.front().mse);
}

TEST_CASE("learnable summaries report Lipschitz diagnostics") {
  TrainResult r = train(tiny(Method::sinkhorn), l96_data(60));
  const EpochRecord& e = r.log.epochs.back();
  CHECK(e.lip_upper > 0.0);
  CHECK(e.lip_lower <= e.lip_upper + 1e-9);
  CHECK(r.log.csv().rfind("epoch,mse,ot", 0) == 0);
}

TEST_CASE("emulator and data dimensions must agree") {
  TrainConfig cfg = tiny(Method::no_ot);
  Model wrong = make_emulator(cfg, 6, 1);
  CHECK_THROWS_AS(train(cfg, l96_data(60), &wrong), DimensionError);
}
