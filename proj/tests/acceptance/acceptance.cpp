// Acceptance suite: one PASS/FAIL line per criterion. With arguments, runs
// only the named criteria (e.g. `acceptance A-OT-1 A-IO-1`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/config.hpp"
#include "chaosot/dynamics.hpp"
#include "chaosot/error.hpp"
#include "chaosot/linalg.hpp"
#include "chaosot/metrics.hpp"
#include "chaosot/model_io.hpp"
#include "chaosot/models.hpp"
#include "chaosot/ot.hpp"
#include "chaosot/rng.hpp"
#include "chaosot/theory.hpp"
#include "chaosot/training.hpp"
#include "chaosot/trajectory_io.hpp"

using namespace chaosot;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PointCloud gaussian_cloud(std::size_t n, std::size_t d, CounterRng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.normal();
  return PointCloud(n, d, std::move(v));
}

// ------------------------------------------------------------------ OT

Outcome ot_exact_agreement() {
  CounterRng rng(2024, 1);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const PointCloud x = gaussian_cloud(6, 2, rng), y = gaussian_cloud(6, 2, rng);
    const double exact = exact_ot_cost(x, y, 2.0);
    SinkhornOptions opt;
    opt.epsilon = 1e-3 * mean_cost(pairwise_cost(x, y, 2.0));
    opt.max_iter = 20000;
    opt.tol = 1e-12;
    opt.anneal = 0.5;
    const double s = sinkhorn_divergence(x, y, 2.0, opt);
    worst = std::max(worst, std::abs(s - exact) / exact);
  }
  return {worst < 0.05, format("worst relative error %.3e (< 5e-2) over 100 instances", worst)};
}

Outcome ot_self_and_symmetry() {
  CounterRng rng(2025, 2);
  double self = 0.0, gap = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n = 2 + rng.below(15), m = 2 + rng.below(15), d = 1 + rng.below(3);
    const PointCloud x = gaussian_cloud(n, d, rng), y = gaussian_cloud(m, d, rng);
    SinkhornOptions opt;
    opt.epsilon = rng.uniform(0.05, 1.0);
    opt.max_iter = 5000;
    opt.tol = 1e-14;
    self = std::max(self, std::abs(sinkhorn_divergence(x, x, 2.0, opt)));
    gap = std::max(gap, std::abs(sinkhorn_divergence(x, y, 2.0, opt) - sinkhorn_divergence(y, x, 2.0, opt)));
  }
  return {self < 1e-9 && gap < 1e-9, format("max |S(X,X)| %.3e, max symmetry gap %.3e (both < 1e-9)", self, gap)};
}

// -------------------------------------------------------------- theory

Outcome theory_row(const std::vector<std::string>& names) {
  static const TheoryReport report = theory_suite(0);
  bool pass = true;
  std::string detail;
  for (const auto& name : names) {
    const CheckResult* c = report.find(name);
    if (c == nullptr) return {false, "missing check " + name};
    pass = pass && c->pass;
    if (!detail.empty()) detail += "; ";
    detail += format("%s measured %.3e <= %.3e", name.c_str(), c->measured, c->bound);
  }
  return {pass, detail};
}

// ----------------------------------------------------------------- LLE

Outcome lle_l96() {
  BenettinOptions opt;  // d0 1e-2, band [1e-5, 10], T 1000, warm-up 100, dt 0.1
  const SystemSpec spec = SystemSpec::lorenz96(60, 10.0);
  const auto r = benettin_lle(make_step_fn(spec, opt.dt, 10), default_initial_state(spec, 0), opt);
  return {std::abs(r.lle - 2.334) <= 0.15, format("LLE %.4f, target 2.334 +- 0.15", r.lle)};
}

Outcome lle_l63() {
  BenettinOptions opt;
  opt.horizon = 10000;
  const SystemSpec spec = SystemSpec::lorenz63();
  const auto r = benettin_lle(make_step_fn(spec, opt.dt, 10), default_initial_state(spec, 0), opt);
  return {std::abs(r.lle - 0.906) <= 0.05, format("LLE %.4f, target 0.906 +- 0.05", r.lle)};
}

// ------------------------------------------------------------ dynamics

Outcome ks_dispersion() {
  const std::size_t m = 256;
  const double length = 32.0 * M_PI, dt = 0.25, amp = 1e-10;
  const int steps = 8;
  const auto coeffs = make_etdrk4_coefficients(m, length, dt);
  double worst = 0.0;
  for (int k : {1, 2, 4, 8, 12, 20, 24}) {
    const double q = 2.0 * M_PI * k / length;
    State u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = amp * std::cos(q * length * i / m);
    const double a0 = std::abs(fft_real(u)[k]);
    for (int s = 0; s < steps; ++s) u = ks_etdrk4_step(u, coeffs);
    const double rate = std::log(std::abs(fft_real(u)[k]) / a0) / (steps * dt);
    const double expected = q * q - q * q * q * q;
    worst = std::max(worst, std::abs(rate - expected) / std::abs(expected));
  }
  return {worst < 1e-4, format("worst relative growth-rate error %.3e (< 1e-4)", worst)};
}

Outcome rk4_order() {
  const SystemSpec spec = SystemSpec::lorenz63();
  auto run = [&](double h) {
    const auto steps = static_cast<std::size_t>(std::llround(0.5 / h));
    const Trajectory t = simulate(spec, {1.0, 1.0, 1.0}, 2, 0.5, 0, steps);
    return State(t.row(1).begin(), t.row(1).end());
  };
  const State a = run(0.01), b = run(0.005), c = run(0.0025);
  auto diff = [](const State& x, const State& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
  };
  const double order = std::log2(diff(a, b) / diff(b, c));
  return {std::abs(order - 4.0) <= 0.2, format("Richardson order %.4f, target 4 +- 0.2", order)};
}

// --------------------------------------------------------------- noise

Outcome noise_blowup() {
  const SystemSpec spec = SystemSpec::lorenz63();
  const double dt = 0.1, sigma2 = 1e-6, lle = 0.906;
  const StepFn step = make_step_fn(spec, dt, 10);
  const Trajectory base = simulate(spec, default_initial_state(spec, 3), 2000, dt, 200, 10);
  CounterRng rng(3, 7);
  const int kmax = 25;
  std::vector<double> mse(kmax + 1, 0.0);
  for (std::size_t s = 0; s < base.steps; ++s) {
    State u(base.row(s).begin(), base.row(s).end()), v = u;
    for (auto& x : v) x += sigma2 * rng.normal();
    for (int k = 1; k <= kmax; ++k) {
      step(u);
      step(v);
      double e = 0.0;
      for (int i = 0; i < 3; ++i) e += (u[i] - v[i]) * (u[i] - v[i]);
      mse[k] += e / 3.0 / static_cast<double>(base.steps);
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (int k = 5; k <= kmax; ++k) {
    const double y = std::log(mse[k]);
    sx += k;
    sy += y;
    sxx += double(k) * k;
    sxy += k * y;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double target = 2.0 * lle * dt;
  return {slope > 0.0 && std::abs(slope - target) <= 0.3 * target,
          format("log-MSE slope %.4f per step, target %.4f +- 30%%", slope, target)};
}

// ---------------------------------------------------------------- grad

struct GradStats {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  void add(const ad::GradCheckResult& r) {
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
};

void grad_check_model(const Model& base, ad::Var (*head)(const Model&, std::span<const ad::Var>, ad::Var),
                      const Tensor& input, GradStats& stats) {
  ad::GradCheckOptions opt;
  opt.max_coords = 24;
  opt.skip_kinks = true;
  stats.add(ad::grad_check(
      [&](ad::Tape& tape, ad::Var x) {
        auto p = bind(tape, base, false);
        return ad::sum(ad::square(head(base, p, x)));
      },
      input, opt));
  for (std::size_t k = 0; k < base.params.size(); ++k) {
    stats.add(ad::grad_check(
        [&](ad::Tape& tape, ad::Var w) {
          auto p = bind(tape, base, false);
          p[k] = w;
          return ad::sum(ad::square(head(base, p, tape.constant(input))));
        },
        base.params[k], opt));
  }
}

ad::Var emulator_head(const Model& m, std::span<const ad::Var> p, ad::Var x) { return emulator_forward(m, p, x); }
ad::Var summary_head(const Model& m, std::span<const ad::Var> p, ad::Var x) { return summary_forward(m, p, x); }
ad::Var critic_head(const Model& m, std::span<const ad::Var> p, ad::Var x) { return critic_forward(m, p, x); }

Tensor random_input(Shape shape, CounterRng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

Outcome grad_all_architectures() {
  GradStats stats[4];
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, 0x47);
    Model mlp = init_model(mlp_spec({3, 16, 16, 16, 16, 3}, ad::Activation::gelu, true), seed);
    grad_check_model(mlp, emulator_head, random_input({4, 3}, rng), stats[0]);

    Model conv = init_model(conv_spec(20, {1, 4, 4, 1}, 2, ad::Activation::gelu), seed);
    grad_check_model(conv, emulator_head, random_input({2, 20}, rng), stats[1]);

    TrainConfig l96 = preset(SystemKind::l96, Method::sinkhorn);
    l96.summary_width = 16;
    Model summary = make_summary(l96, 12, seed);
    grad_check_model(summary, summary_head, random_input({2, 12}, rng), stats[2]);

    l96.critic_width = 16;
    Model critic = make_critic(l96, seed);
    grad_check_model(critic, critic_head, random_input({8, 3}, rng), stats[3]);
  }
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (const auto& s : stats) {
    worst = std::max(worst, s.worst);
    checked += s.checked;
    skipped += s.skipped;
  }
  return {worst < 1e-6, format("max relative error: mlp %.2e, conv %.2e, summary %.2e, critic %.2e (< 1e-6); "
                               "%zu coordinates checked, %zu skipped at activation kinks",
                               stats[0].worst, stats[1].worst, stats[2].worst, stats[3].worst, checked, skipped)};
}

// --------------------------------------------------------------- train

Outcome train_linear_recovery() {
  const std::size_t m = 4, steps = 400;
  CounterRng rng(11, 0x4C);
  // A = 0.99 * Q with Q a random orthogonal matrix (Gram-Schmidt).
  std::vector<double> q(m * m);
  for (auto& x : q) x = rng.normal();
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < m; ++r) d += q[r * m + c] * q[r * m + p];
      for (std::size_t r = 0; r < m; ++r) q[r * m + c] -= d * q[r * m + p];
    }
    double n = 0.0;
    for (std::size_t r = 0; r < m; ++r) n += q[r * m + c] * q[r * m + c];
    for (std::size_t r = 0; r < m; ++r) q[r * m + c] /= std::sqrt(n);
  }
  for (auto& x : q) x *= 0.99;
  const Tensor a({m, m}, q);

  Trajectory data;
  data.dt = 1.0;
  data.steps = steps;
  data.dim = m;
  State u(m);
  for (auto& x : u) x = rng.normal();
  for (std::size_t t = 0; t < steps; ++t) {
    data.states.insert(data.states.end(), u.begin(), u.end());
    u = matvec(a, u);
  }

  TrainConfig cfg = preset(SystemKind::generic, Method::no_ot);
  cfg.emulator = "linear";
  cfg.emulator_residual = false;
  cfg.window = 20;
  cfg.stride = 1;
  cfg.batch_windows = 16;
  cfg.epochs = 200;
  cfg.lr = 0.1;
  cfg.momentum = 0.9;
  cfg.grad_clip = 0.0;
  cfg.seed = 5;
  const TrainResult r = train(cfg, data);

  // Least-squares oracle over every consecutive pair.
  std::vector<double> sxx(m * m, 0.0), syx(m * m, 0.0);
  for (std::size_t t = 0; t + 1 < steps; ++t)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        sxx[i * m + j] += data.row(t)[i] * data.row(t)[j];
        syx[i * m + j] += data.row(t + 1)[i] * data.row(t)[j];
      }
  const auto eig = jacobi_eigen(sxx, m);
  std::vector<double> inv(m * m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const auto v = eig.vector(k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) inv[i * m + j] += v[i] * v[j] / eig.values[k];
  }
  const Tensor ls = matmul(Tensor({m, m}, syx), Tensor({m, m}, inv));

  double err_true = 0.0, err_ls = 0.0;
  const Tensor& w = r.emulator.weight(0);
  for (std::size_t i = 0; i < m * m; ++i) {
    err_true += (w[i] - a[i]) * (w[i] - a[i]);
    err_ls += (w[i] - ls[i]) * (w[i] - ls[i]);
  }
  err_true = std::sqrt(err_true);
  err_ls = std::sqrt(err_ls);
  return {err_true < 1e-3 && err_ls < 1e-3,
          format("Frobenius error vs true %.3e, vs least squares %.3e (< 1e-3)", err_true, err_ls)};
}

double lobe_balance(const Trajectory& t) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < t.steps; ++i) pos += t.row(i)[0] > 0.0;
  const double frac = static_cast<double>(pos) / static_cast<double>(t.steps);
  return std::min(frac, 1.0 - frac);
}

Outcome train_l63_coverage() {
  const SystemSpec spec = SystemSpec::lorenz63();
  const double dt = 0.1;
  const Trajectory clean = simulate(spec, default_initial_state(spec, 1), 4000, dt, 500, 10);
  const Trajectory data = add_noise(clean, {0.15, 17});
  const State u0(clean.row(0).begin(), clean.row(0).end());

  auto run = [&](Method method) {
    TrainConfig cfg = preset(SystemKind::l63, method);
    cfg.seed = 1;
    const TrainResult r = train(cfg, data);
    try {
      return lobe_balance(rollout(r.emulator, u0, 20000, dt, SystemKind::l63));
    } catch (const NumericalError&) {
      return 0.0;
    }
  };
  const double wgan = run(Method::wgan);
  const double no_ot = run(Method::no_ot);
  return {wgan >= 0.2, format("minority-lobe occupancy: wgan %.3f (>= 0.2), no-ot %.3f (%s, not gated)", wgan, no_ot,
                              no_ot >= 0.2 ? "also covers both lobes" : "fails the bound")};
}

Outcome train_l96_methods() {
  const SystemSpec spec = SystemSpec::lorenz96(20, 10.0);
  const double dt = 0.01;
  const Trajectory clean = simulate(spec, default_initial_state(spec, 1), 2000, dt, 1000, 1);
  const Trajectory data = add_noise(clean, {0.3, 21});
  const Trajectory test = simulate(spec, default_initial_state(spec, 2), 1501, dt, 1000, 1);
  const State u0(test.row(0).begin(), test.row(0).end());
  const PointCloud truth_cloud = fixed_summary_cloud(test);

  struct Score {
    double spectral, hist;
  };
  auto run = [&](Method method) -> Score {
    TrainConfig cfg = preset(SystemKind::l96, method);
    cfg.epochs = 10;
    cfg.steps_per_epoch = 60;
    cfg.ot_points = 128;
    cfg.seed = 4;
    const TrainResult r = train(cfg, data);
    try {
      const Trajectory pred = rollout(r.emulator, u0, test.steps, dt, SystemKind::l96);
      return {spectral_distance(test, pred), l1_hist_error(truth_cloud, fixed_summary_cloud(pred))};
    } catch (const NumericalError&) {
      return {INFINITY, INFINITY};
    }
  };
  const Score no_ot = run(Method::no_ot), fixed = run(Method::fixed_ot), sink = run(Method::sinkhorn),
              wgan = run(Method::wgan);
  const bool pass = sink.spectral <= 0.8 * no_ot.spectral && wgan.spectral <= 0.8 * no_ot.spectral &&
                    sink.hist <= 1.1 * fixed.hist && wgan.hist <= 1.1 * fixed.hist;
  return {pass, format("spectral: no-ot %.4f fixed %.4f sinkhorn %.4f wgan %.4f; hist: no-ot %.4f fixed %.4f "
                       "sinkhorn %.4f wgan %.4f",
                       no_ot.spectral, fixed.spectral, sink.spectral, wgan.spectral, no_ot.hist, fixed.hist, sink.hist,
                       wgan.hist)};
}

// ------------------------------------------------------------------ IO

Outcome io_round_trip() {
  const SystemSpec spec = SystemSpec::lorenz96(12, 8.0);
  const Trajectory t = add_noise(simulate(spec, default_initial_state(spec, 0), 50, 0.01, 10, 1), {0.3, 1});
  const auto tb = encode_trajectory(t);
  save_trajectory("acceptance_io.traj", t);
  const bool traj_ok = encode_trajectory(load_trajectory("acceptance_io.traj")) == tb;

  bool model_ok = true;
  const std::vector<Model> models = {
      init_model(mlp_spec({3, 8, 3}, ad::Activation::gelu, true), 1),
      init_model(conv_spec(12, {1, 3, 1}, 2, ad::Activation::relu), 2),
      init_model(linear_spec(3, 5, 1), 3),
  };
  for (const auto& m : models) {
    const auto mb = encode_model(m);
    save_model("acceptance_io.model", m);
    model_ok = model_ok && encode_model(load_model("acceptance_io.model")) == mb;
  }
  std::remove("acceptance_io.traj");
  std::remove("acceptance_io.model");
  return {traj_ok && model_ok, format("trajectory %s, models %s", traj_ok ? "identical" : "DIFFER",
                                      model_ok ? "identical" : "DIFFER")};
}

struct Criterion {
  std::string id;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::vector<Criterion> criteria() {
  std::vector<Criterion> c = {
      {"A-OT-1", 10, ot_exact_agreement},
      {"A-OT-2", 60, ot_self_and_symmetry},
  };
  const char* rows[9][2] = {{"P1", nullptr},       {"P2", nullptr}, {"P3", nullptr},
                            {"P4", nullptr},       {"P5", "P5-slope"}, {"P6", nullptr},
                            {"P7", nullptr},       {"P8", nullptr}, {"P9", "P9-trace"}};
  for (int i = 0; i < 9; ++i) {
    std::vector<std::string> names = {rows[i][0]};
    if (rows[i][1]) names.emplace_back(rows[i][1]);
    c.push_back({"A-THY-" + std::to_string(i + 1), 120, [names] { return theory_row(names); }});
  }
  c.push_back({"A-LLE-1", 60, lle_l96});
  c.push_back({"A-LLE-2", 30, lle_l63});
  c.push_back({"A-DYN-1", 5, ks_dispersion});
  c.push_back({"A-DYN-2", 5, rk4_order});
  c.push_back({"A-NOISE-1", 30, noise_blowup});
  c.push_back({"A-GRAD-1", 30, grad_all_architectures});
  c.push_back({"A-TRAIN-0", 60, train_linear_recovery});
  c.push_back({"A-TRAIN-1", 1200, train_l63_coverage});
  c.push_back({"A-TRAIN-2", 1800, train_l96_methods});
  c.push_back({"A-IO-1", 1, io_round_trip});
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    std::printf("%s %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id.c_str(), o.detail.c_str(), secs,
                c.budget_seconds, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
    failures += !pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no matching criteria\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
