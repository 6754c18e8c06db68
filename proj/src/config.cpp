#include "chaosot/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "chaosot/error.hpp"

namespace chaosot {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw FormatError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw FormatError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string help;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define DOUBLE_FIELD(name, help)                                                                          \
  {                                                                                                       \
    #name, Field {                                                                                        \
      help, [](TrainConfig& c, const std::string& k, const std::string& v) { c.name = to_double(k, v); }, \
          [](const TrainConfig& c) { return fmt(c.name); }                                                \
    }                                                                                                     \
  }
#define SIZE_FIELD(name, help)                                                                        \
  {                                                                                                   \
    #name, Field {                                                                                    \
      help,                                                                                           \
          [](TrainConfig& c, const std::string& k, const std::string& v) {                            \
            c.name = static_cast<decltype(c.name)>(to_uint(k, v));                                    \
          },                                                                                          \
          [](const TrainConfig& c) { return std::to_string(c.name); }                                 \
    }                                                                                                 \
  }
#define BOOL_FIELD(name, help)                                                                           \
  {                                                                                                      \
    #name, Field {                                                                                       \
      help, [](TrainConfig& c, const std::string& k, const std::string& v) { c.name = to_bool(k, v); }, \
          [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }                    \
    }                                                                                                    \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"method",
       {"training method: no-ot | fixed-ot | sinkhorn | wgan",
        [](TrainConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); },
        [](const TrainConfig& c) { return to_string(c.method); }}},
      {"system",
       {"system tag: l63 | l96 | ks | generic",
        [](TrainConfig& c, const std::string&, const std::string& v) { c.system = parse_system_kind(v); },
        [](const TrainConfig& c) { return to_string(c.system); }}},
      DOUBLE_FIELD(ks_length, "KS domain length used by the fixed summary"),
      {"emulator",
       {"emulator architecture: mlp | conv | linear",
        [](TrainConfig& c, const std::string&, const std::string& v) { c.emulator = v; },
        [](const TrainConfig& c) { return c.emulator; }}},
      SIZE_FIELD(emulator_width, "hidden width of the MLP emulator"),
      SIZE_FIELD(emulator_depth, "hidden layers (mlp) or convolution layers (conv)"),
      SIZE_FIELD(conv_channels, "hidden channels of the conv emulator"),
      SIZE_FIELD(conv_radius, "kernel radius r of the conv emulator (kernel 2r+1)"),
      {"emulator_activation",
       {"emulator activation: identity | relu | gelu | tanh",
        [](TrainConfig& c, const std::string&, const std::string& v) { c.emulator_activation = parse_activation(v); },
        [](const TrainConfig& c) { return to_string(c.emulator_activation); }}},
      BOOL_FIELD(emulator_residual, "emulator predicts u + network(u)"),
      SIZE_FIELD(summary_width, "hidden width of the summary MLP"),
      SIZE_FIELD(summary_depth, "hidden layers of the summary MLP (0: linear summary)"),
      SIZE_FIELD(summary_dim, "summary dimension d per point"),
      {"summary_activation",
       {"summary activation: identity | relu | gelu | tanh",
        [](TrainConfig& c, const std::string&, const std::string& v) { c.summary_activation = parse_activation(v); },
        [](const TrainConfig& c) { return to_string(c.summary_activation); }}},
      SIZE_FIELD(critic_width, "hidden width of the WGAN critic"),
      DOUBLE_FIELD(lambda, "weight of the OT term"),
      DOUBLE_FIELD(epsilon, "Sinkhorn entropic regularization"),
      BOOL_FIELD(epsilon_relative, "interpret epsilon as a multiple of the mean cost"),
      DOUBLE_FIELD(p, "ground-cost exponent"),
      SIZE_FIELD(sinkhorn_iters, "maximum unrolled Sinkhorn iterations"),
      DOUBLE_FIELD(sinkhorn_tol, "Sinkhorn potential-change tolerance"),
      DOUBLE_FIELD(sinkhorn_anneal, "epsilon annealing factor per iteration (0: off)"),
      SIZE_FIELD(ot_points, "points per OT cloud after subsampling"),
      SIZE_FIELD(window, "teacher-forcing window length"),
      SIZE_FIELD(stride, "teacher-forcing window stride"),
      SIZE_FIELD(batch_windows, "windows per gradient step"),
      SIZE_FIELD(epochs, "training epochs"),
      SIZE_FIELD(steps_per_epoch, "gradient steps per epoch (0: one pass over all windows)"),
      {"warmup_epochs",
       {"MSE-only warm-up epochs (auto: 10% of epochs)",
        [](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "auto")
            c.warmup_epochs.reset();
          else
            c.warmup_epochs = to_uint(k, v);
        },
        [](const TrainConfig& c) { return c.warmup_epochs ? std::to_string(*c.warmup_epochs) : std::string("auto"); }}},
      SIZE_FIELD(adversary_steps, "adversary steps per emulator step"),
      DOUBLE_FIELD(early_stop_fraction, "fraction of epochs after which the Sinkhorn summary is frozen"),
      DOUBLE_FIELD(lr, "emulator learning rate"),
      DOUBLE_FIELD(adversary_lr, "summary / critic learning rate"),
      DOUBLE_FIELD(momentum, "emulator SGD momentum (0: plain SGD)"),
      DOUBLE_FIELD(grad_clip, "global gradient-norm clip (0: off)"),
      DOUBLE_FIELD(critic_clip, "critic weight clip c"),
      DOUBLE_FIELD(summary_clip, "summary weight clip (0: off)"),
      DOUBLE_FIELD(lip_weight, "weight of the summary Lipschitz hinge regularizer (0: off)"),
      DOUBLE_FIELD(lip_min, "lower Lipschitz target L_min"),
      DOUBLE_FIELD(lip_max, "upper Lipschitz target L_max"),
      DOUBLE_FIELD(lip_beta, "hinge sharpness beta"),
      SIZE_FIELD(seed, "random seed"),
  };
  return table;
}

#undef DOUBLE_FIELD
#undef SIZE_FIELD
#undef BOOL_FIELD

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& [name, f] : fields()) k.push_back({name, f.help});
    return k;
  }();
  return keys;
}

TrainConfig preset(SystemKind system, Method method) {
  TrainConfig c;
  c.method = method;
  c.system = system;
  switch (system) {
    case SystemKind::l63:
      c.emulator = "mlp";
      c.emulator_width = 128;
      c.emulator_depth = 4;
      c.emulator_activation = ad::Activation::gelu;
      c.lambda = 0.2;
      c.epsilon = 0.05;
      c.p = 2.0;
      c.summary_width = 64;
      c.summary_depth = 2;
      c.summary_dim = 1;
      c.summary_activation = ad::Activation::gelu;
      c.warmup_epochs = 10;
      c.epochs = 40;
      c.steps_per_epoch = 200;
      c.grad_clip = 1.0;
      c.lr = 0.01;
      c.momentum = 0.9;
      c.adversary_lr = 0.01;
      c.critic_clip = 3.0;
      break;
    case SystemKind::l96:
    case SystemKind::ks:
      c.emulator = "conv";
      c.emulator_depth = 3;
      c.conv_channels = 16;
      c.conv_radius = 2;
      c.emulator_activation = ad::Activation::gelu;
      c.lambda = 3.0;
      c.epsilon = 0.02;
      c.p = 2.0;
      c.summary_width = 128;
      c.summary_depth = 2;
      c.summary_dim = 3;
      c.summary_activation = ad::Activation::relu;
      c.epochs = 10;
      break;
    case SystemKind::generic:
      break;
  }
  c.window = 100;
  c.stride = 2;
  c.early_stop_fraction = 0.7;
  return c;
}

void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, f] : fields()) {
    if (name == key) {
      try {
        f.set(cfg, key, value);
      } catch (const InvalidArgument& e) {
        throw FormatError("key '" + key + "': " + e.what());
      }
      return;
    }
  }
  throw FormatError("unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw FormatError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw FormatError(where + "empty key or value");
    try {
      apply_config_value(cfg, key, value);
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace chaosot
