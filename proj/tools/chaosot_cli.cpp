#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>

#include "chaosot/binary_io.hpp"
#include "chaosot/config.hpp"
#include "chaosot/dynamics.hpp"
#include "chaosot/error.hpp"
#include "chaosot/manifest.hpp"
#include "chaosot/metrics.hpp"
#include "chaosot/model_io.hpp"
#include "chaosot/rng.hpp"
#include "chaosot/theory.hpp"
#include "chaosot/training.hpp"
#include "chaosot/trajectory_io.hpp"

using namespace chaosot;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t thread_cap() {
  const char* env = std::getenv("CHAOS_OT_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw UsageError("CHAOS_OT_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string> config_map(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

RunManifest start_manifest(const std::string& command, int argc, char** argv, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  for (int i = 1; i < argc; ++i) m.argv.emplace_back(argv[i]);
  m.seed = seed;
  m.config["threads"] = std::to_string(thread_cap());
  return m;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string system;
  std::optional<std::size_t> dim;
  std::optional<double> forcing;
  std::optional<std::string> params;
  std::optional<double> length;
  std::optional<double> dt;
  std::size_t steps = 1000;
  std::size_t burn_in = 1000;
  std::size_t substeps = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

L63Params parse_l63_params(const std::string& text) {
  L63Params p;
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--params expects sigma,rho,beta");
    }
  }
  if (v.size() != 3) throw UsageError("--params expects sigma,rho,beta");
  p.sigma = v[0];
  p.rho = v[1];
  p.beta = v[2];
  return p;
}

SystemSpec system_from_args(const SimulateArgs& a) {
  const SystemKind kind = parse_system_kind(a.system);
  switch (kind) {
    case SystemKind::l63:
      if (a.forcing) throw UsageError("--forcing is not valid for l63");
      if (a.length) throw UsageError("--length is only valid for ks");
      if (a.dim && *a.dim != 3) throw UsageError("l63 has dimension 3");
      return SystemSpec::lorenz63(a.params ? parse_l63_params(*a.params) : L63Params{});
    case SystemKind::l96:
      if (a.params) throw UsageError("--params is only valid for l63");
      if (a.length) throw UsageError("--length is only valid for ks");
      return SystemSpec::lorenz96(a.dim.value_or(60), a.forcing.value_or(10.0));
    case SystemKind::ks:
      if (a.forcing) throw UsageError("--forcing is not valid for ks");
      if (a.params) throw UsageError("--params is only valid for l63");
      return SystemSpec::kuramoto_sivashinsky(a.dim.value_or(256), a.length.value_or(KsParams{}.length));
    case SystemKind::generic:
      break;
  }
  throw UsageError("--system must be l63, l96 or ks");
}

double default_dt(SystemKind kind) { return kind == SystemKind::ks ? 0.25 : 0.01; }

int run_simulate(const SimulateArgs& a, int argc, char** argv) {
  const auto t0 = Clock::now();
  const SystemSpec spec = system_from_args(a);
  const double dt = a.dt.value_or(default_dt(spec.kind()));
  Trajectory traj = simulate(spec, default_initial_state(spec, a.seed), a.steps, dt, a.burn_in, a.substeps);
  traj = add_noise(traj, {a.noise, splitmix64(a.seed ^ 0x6E6F697365ULL)});
  save_trajectory(a.out, traj);

  RunManifest m = start_manifest("simulate", argc, argv, a.seed);
  m.config["system"] = to_string(spec.kind());
  m.config["dim"] = std::to_string(spec.dim());
  m.config["dt"] = fmt(dt);
  m.config["steps"] = std::to_string(a.steps);
  m.config["burn_in"] = std::to_string(a.burn_in);
  m.config["substeps"] = std::to_string(a.substeps);
  m.config["noise"] = fmt(a.noise);
  if (const auto* p = std::get_if<L96Params>(&spec.params())) m.config["forcing"] = fmt(p->forcing);
  if (const auto* p = std::get_if<KsParams>(&spec.params())) m.config["length"] = fmt(p->length);
  if (const auto* p = std::get_if<L63Params>(&spec.params()))
    m.config["params"] = fmt(p->sigma) + "," + fmt(p->rho) + "," + fmt(p->beta);
  m.add_output(a.out);
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, a.out);
  std::printf("wrote %s: T=%zu m=%zu dt=%g\n", a.out.c_str(), traj.steps, traj.dim, dt);
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::optional<std::string> config;
  std::string data;
  std::string method;
  std::string out;
  std::optional<std::string> log;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a, int argc, char** argv) {
  const auto t0 = Clock::now();
  const Method method = parse_method(a.method);
  const Trajectory data = load_trajectory(a.data);
  TrainConfig cfg = preset(data.system, method);
  if (a.config) {
    const auto bytes = io::read_file(*a.config);
    apply_config_text(cfg, std::string(bytes.begin(), bytes.end()), *a.config);
  }
  cfg.method = method;
  cfg.system = data.system;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const TrainResult result = train(cfg, data);
  save_model(a.out, result.emulator);
  const std::string log_path = a.log.value_or(a.out + ".log.csv");
  io::write_text_atomic(log_path, result.log.csv());

  RunManifest m = start_manifest("train", argc, argv, cfg.seed);
  for (const auto& [k, v] : config_map(config_to_text(cfg))) m.config[k] = v;
  m.add_input(a.data);
  if (a.config) m.add_input(*a.config);
  m.add_output(a.out);
  m.add_output(log_path);
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, a.out);
  const auto& last = result.log.epochs.back();
  std::printf("trained %s (%s): epochs=%zu final mse=%.6g ot=%.6g\n", a.out.c_str(), to_string(method).c_str(),
              result.log.epochs.size(), last.mse, last.ot);
  return kOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::size_t rollout = 100;
  double noise = 0.0;
  std::string metrics;
  std::size_t starts = 1;
  std::optional<double> ks_length;
  std::uint64_t seed = 0;
};

void check_model_matches(const Model& model, const Trajectory& data) {
  if (model.spec.output_dim() != data.dim || model.spec.input_dim() != data.dim)
    throw DimensionError("model state dimension " + std::to_string(model.spec.output_dim()) +
                         " does not match data dimension " + std::to_string(data.dim));
  if (model.spec.system != SystemKind::generic && data.system != SystemKind::generic &&
      model.spec.system != data.system)
    throw DimensionError("model was trained for " + to_string(model.spec.system) + " but data is " +
                         to_string(data.system));
}

PointCloud concat_clouds(const std::vector<PointCloud>& clouds) {
  std::vector<double> pts;
  std::size_t n = 0, d = clouds.front().d;
  for (const auto& c : clouds) {
    pts.insert(pts.end(), c.points.begin(), c.points.end());
    n += c.n;
  }
  return PointCloud(n, d, std::move(pts));
}

int run_eval(const EvalArgs& a, int argc, char** argv) {
  const auto t0 = Clock::now();
  const Model model = load_model(a.model);
  const Trajectory data = load_trajectory(a.data);
  check_model_matches(model, data);
  if (a.rollout < 1) throw UsageError("--rollout must be >= 1");
  if (a.starts < 1) throw UsageError("--starts must be >= 1");
  if (a.rollout * a.starts >= data.steps)
    throw DimensionError("data has " + std::to_string(data.steps) + " states; need more than rollout * starts = " +
                         std::to_string(a.rollout * a.starts));
  const double ks_length = a.ks_length.value_or(KsParams{}.length);
  const double sd = a.noise * pooled_std(data.states);
  CounterRng rng(a.seed, 0x4556414CULL);

  std::vector<double> preds, targets;
  std::vector<PointCloud> truth_clouds, pred_clouds;
  double spectral = 0.0;
  for (std::size_t s = 0; s < a.starts; ++s) {
    const std::size_t t = s * a.rollout;
    State u0(data.row(t).begin(), data.row(t).end());
    for (auto& v : u0) v += sd * rng.normal();
    const Trajectory pred = rollout(model, u0, a.rollout + 1, data.dt, data.system);
    Trajectory truth;
    truth.system = data.system;
    truth.dt = data.dt;
    truth.steps = a.rollout + 1;
    truth.dim = data.dim;
    truth.states.assign(data.row(t).begin(), data.row(t).begin() + truth.steps * data.dim);
    preds.insert(preds.end(), pred.states.begin() + data.dim, pred.states.end());
    targets.insert(targets.end(), truth.states.begin() + data.dim, truth.states.end());
    spectral += spectral_distance(truth, pred) / static_cast<double>(a.starts);
    if (truth.steps >= 3) {
      truth_clouds.push_back(fixed_summary_cloud(truth, ks_length));
      pred_clouds.push_back(fixed_summary_cloud(pred, ks_length));
    }
  }
  const std::string setting = a.noise > 0.0 ? "noisy" : "clean";
  std::vector<MetricRow> rows = {
      {"rmse", setting, relative_rmse(preds, targets, data.dim)},
      {"spectral_distance", setting, spectral},
  };
  if (!truth_clouds.empty())
    rows.push_back({"l1_hist_error", setting, l1_hist_error(concat_clouds(truth_clouds), concat_clouds(pred_clouds))});
  io::write_text_atomic(a.metrics, metrics_csv(rows));

  RunManifest m = start_manifest("eval", argc, argv, a.seed);
  m.config["rollout"] = std::to_string(a.rollout);
  m.config["starts"] = std::to_string(a.starts);
  m.config["noise"] = fmt(a.noise);
  m.config["ks_length"] = fmt(ks_length);
  m.add_input(a.model);
  m.add_input(a.data);
  m.add_output(a.metrics);
  m.wall_seconds = seconds_since(t0);
  write_manifest(m, a.metrics);
  for (const auto& r : rows) std::printf("%s,%s,%.10g\n", r.metric.c_str(), r.setting.c_str(), r.value);
  return kOk;
}

// --------------------------------------------------------------- lyapunov

struct LyapunovArgs {
  std::optional<std::string> model;
  std::optional<std::string> data;
  SimulateArgs system;
  std::optional<double> dt;
  std::size_t substeps = 10;
  std::size_t horizon = 1000;
  std::size_t warmup = 100;
  double d0 = 1e-2;
  double band_lo = 1e-5;
  double band_hi = 10.0;
  bool final_segment = true;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

int run_lyapunov(const LyapunovArgs& a, int argc, char** argv) {
  const auto t0 = Clock::now();
  if (a.model.has_value() == !a.system.system.empty())
    throw UsageError("give exactly one of --model or --system");
  BenettinOptions opt;
  opt.d0 = a.d0;
  opt.band_lo = a.band_lo;
  opt.band_hi = a.band_hi;
  opt.horizon = a.horizon;
  opt.warmup = a.warmup;
  opt.seed = a.seed;
  opt.count_final_segment = a.final_segment;

  RunManifest m = start_manifest("lyapunov", argc, argv, a.seed);
  StepFn step;
  State u0;
  std::string setting;
  if (a.model) {
    const Model model = load_model(*a.model);
    m.add_input(*a.model);
    if (a.data) {
      const Trajectory data = load_trajectory(*a.data);
      check_model_matches(model, data);
      m.add_input(*a.data);
      u0.assign(data.row(0).begin(), data.row(0).end());
      opt.dt = a.dt.value_or(data.dt);
    } else {
      if (model.spec.system == SystemKind::generic) throw UsageError("--data is required for a generic model");
      SimulateArgs sa;
      sa.system = to_string(model.spec.system);
      sa.dim = model.spec.state_dim;
      u0 = default_initial_state(system_from_args(sa), a.seed);
      if (!a.dt) throw UsageError("--dt is required without --data");
      opt.dt = *a.dt;
    }
    step = model_step_fn(model);
    setting = "model";
  } else {
    const SystemSpec spec = system_from_args(a.system);
    opt.dt = a.dt.value_or(0.1);
    step = make_step_fn(spec, opt.dt, a.substeps);
    u0 = default_initial_state(spec, a.seed);
    setting = to_string(spec.kind());
  }
  const BenettinResult r = benettin_lle(step, u0, opt);

  m.config["dt"] = fmt(opt.dt);
  m.config["substeps"] = std::to_string(a.substeps);
  m.config["horizon"] = std::to_string(a.horizon);
  m.config["warmup"] = std::to_string(a.warmup);
  m.config["d0"] = fmt(a.d0);
  m.config["band"] = fmt(a.band_lo) + "," + fmt(a.band_hi);
  m.config["final_segment"] = a.final_segment ? "true" : "false";
  std::printf("lle=%.10g rescalings=%zu\n", r.lle, r.rescalings);
  if (a.out) {
    const MetricRow row{"lle", setting, r.lle};
    io::write_text_atomic(*a.out, metrics_csv(std::span(&row, 1)));
    m.add_output(*a.out);
    m.wall_seconds = seconds_since(t0);
    write_manifest(m, *a.out);
  }
  return kOk;
}

// ------------------------------------------------------------------ verify

int run_verify(std::uint64_t seed, const std::optional<std::string>& out) {
  const TheoryReport report = theory_suite(seed);
  const std::string csv = report.csv();
  std::fputs(csv.c_str(), stdout);
  if (out) io::write_text_atomic(*out, csv);
  return report.all_pass() ? kOk : kNumerical;
}

std::string config_help() {
  std::string s = "Config keys (key = value):\n";
  for (const auto& k : config_keys()) s += "  " + k.name + ": " + k.help + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chaotic-system emulators trained with optimal-transport regularizers"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a ground-truth trajectory");
  c_sim->add_option("--system", sim.system, "l63 | l96 | ks")->required();
  c_sim->add_option("--dim", sim.dim, "State dimension (l96 sites, ks grid points)");
  c_sim->add_option("--forcing", sim.forcing, "Lorenz-96 forcing F");
  c_sim->add_option("--params", sim.params, "Lorenz-63 sigma,rho,beta");
  c_sim->add_option("--length", sim.length, "Kuramoto-Sivashinsky domain length");
  c_sim->add_option("--dt", sim.dt, "Stored time step");
  c_sim->add_option("--steps", sim.steps, "Number of stored states")->capture_default_str();
  c_sim->add_option("--burn-in", sim.burn_in, "Discarded initial steps")->capture_default_str();
  c_sim->add_option("--substeps", sim.substeps, "Integrator substeps per stored step")->capture_default_str();
  c_sim->add_option("--noise", sim.noise, "Observation noise, relative to the pooled std")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "Output trajectory file")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train an emulator");
  c_train->add_option("--config", tr.config, "Config file overriding the system preset");
  c_train->add_option("--data", tr.data, "Training trajectory")->required();
  c_train->add_option("--method", tr.method, "no-ot | fixed-ot | sinkhorn | wgan")->required();
  c_train->add_option("--out", tr.out, "Output model file")->required();
  c_train->add_option("--log", tr.log, "Per-epoch CSV log (default OUT.log.csv)");
  c_train->add_option("--seed", tr.seed, "Overrides the config seed");
  c_train->footer(config_help());

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate autoregressive rollouts");
  c_eval->add_option("--model", ev.model, "Model file")->required();
  c_eval->add_option("--data", ev.data, "Reference trajectory")->required();
  c_eval->add_option("--rollout", ev.rollout, "Rollout length K")->capture_default_str();
  c_eval->add_option("--noise", ev.noise, "Initial-state noise, relative to the pooled std")->capture_default_str();
  c_eval->add_option("--starts", ev.starts, "Number of consecutive initial states")->capture_default_str();
  c_eval->add_option("--ks-length", ev.ks_length, "Domain length for the ks fixed summary");
  c_eval->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
  c_eval->add_option("--metrics", ev.metrics, "Output metrics CSV")->required();

  LyapunovArgs ly;
  auto* c_ly = app.add_subcommand("lyapunov", "Estimate the largest Lyapunov exponent");
  c_ly->add_option("--model", ly.model, "Model file");
  c_ly->add_option("--data", ly.data, "Trajectory supplying the initial state and dt for --model");
  c_ly->add_option("--system", ly.system.system, "l63 | l96 | ks");
  c_ly->add_option("--dim", ly.system.dim, "State dimension");
  c_ly->add_option("--forcing", ly.system.forcing, "Lorenz-96 forcing F");
  c_ly->add_option("--params", ly.system.params, "Lorenz-63 sigma,rho,beta");
  c_ly->add_option("--length", ly.system.length, "Kuramoto-Sivashinsky domain length");
  c_ly->add_option("--dt", ly.dt, "Time per step (default 0.1 for systems)");
  c_ly->add_option("--substeps", ly.substeps, "Integrator substeps per step")->capture_default_str();
  c_ly->add_option("--horizon", ly.horizon, "Measured steps")->capture_default_str();
  c_ly->add_option("--warmup", ly.warmup, "Discarded steps")->capture_default_str();
  c_ly->add_option("--d0", ly.d0, "Initial separation")->capture_default_str();
  c_ly->add_option("--band-lo", ly.band_lo, "Rescale below this separation")->capture_default_str();
  c_ly->add_option("--band-hi", ly.band_hi, "Rescale above this separation")->capture_default_str();
  c_ly->add_option("--final-segment", ly.final_segment, "Count the last open segment")->capture_default_str();
  c_ly->add_option("--seed", ly.seed, "Random seed")->capture_default_str();
  c_ly->add_option("--out", ly.out, "Output CSV row");

  std::uint64_t verify_seed = 0;
  std::optional<std::string> verify_out;
  auto* c_verify = app.add_subcommand("verify", "Run the theory verification suite");
  c_verify->add_option("--seed", verify_seed, "Random seed")->capture_default_str();
  c_verify->add_option("--out", verify_out, "Also write the report CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    thread_cap();
    if (c_sim->parsed()) return run_simulate(sim, argc, argv);
    if (c_train->parsed()) return run_train(tr, argc, argv);
    if (c_eval->parsed()) return run_eval(ev, argc, argv);
    if (c_ly->parsed()) return run_lyapunov(ly, argc, argv);
    if (c_verify->parsed()) return run_verify(verify_seed, verify_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::system_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
