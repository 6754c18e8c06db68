#include "chaosot/models.hpp"

#include <algorithm>
#include <cmath>

#include "chaosot/error.hpp"
#include "chaosot/rng.hpp"

namespace chaosot {

using ad::Activation;
using ad::Var;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::conv: return "conv";
    case ModelKind::linear: return "linear";
  }
  return "mlp";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::size_t ModelSpec::input_dim() const {
  return kind == ModelKind::conv ? state_dim * widths.front() : widths.front();
}

std::size_t ModelSpec::output_dim() const {
  return kind == ModelKind::conv ? state_dim * widths.back() : widths.back();
}

void ModelSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("model needs at least one layer");
  for (auto w : widths)
    if (w == 0) throw InvalidArgument("model widths must be positive");
  switch (kind) {
    case ModelKind::mlp:
      if (widths.size() < 3) throw InvalidArgument("MLP needs at least one hidden layer");
      if (out_rows > 0 && widths.back() % out_rows != 0)
        throw InvalidArgument("MLP output width is not divisible by the output rows");
      break;
    case ModelKind::conv:
      if (radius < 1) throw InvalidArgument("conv kernel radius must be >= 1");
      if (widths.front() != 1 || widths.back() != 1) throw InvalidArgument("conv emulator must have one input and output channel");
      if (state_dim < 2 * radius + 1) throw InvalidArgument("conv kernel longer than the state");
      break;
    case ModelKind::linear:
      if (widths.size() != 2) throw InvalidArgument("linear model is a single layer");
      if (out_rows > 0 && widths.back() % out_rows != 0)
        throw InvalidArgument("linear output width is not divisible by the output rows");
      break;
  }
  if (residual && input_dim() != output_dim()) throw InvalidArgument("residual model must preserve dimension");
}

ModelSpec mlp_spec(std::vector<std::size_t> widths, Activation act, bool residual, std::size_t out_rows) {
  ModelSpec s;
  s.kind = ModelKind::mlp;
  s.widths = std::move(widths);
  s.activation = act;
  s.residual = residual;
  s.out_rows = out_rows;
  s.state_dim = s.widths.empty() ? 0 : s.widths.front();
  s.validate();
  return s;
}

ModelSpec conv_spec(std::size_t state_dim, std::vector<std::size_t> channels, std::size_t radius, Activation act,
                    bool residual) {
  ModelSpec s;
  s.kind = ModelKind::conv;
  s.widths = std::move(channels);
  s.activation = act;
  s.residual = residual;
  s.radius = radius;
  s.state_dim = state_dim;
  s.validate();
  return s;
}

ModelSpec linear_spec(std::size_t dim, bool residual) {
  ModelSpec s = linear_spec(dim, dim, 0);
  s.residual = residual;
  s.validate();
  return s;
}

ModelSpec linear_spec(std::size_t in, std::size_t out, std::size_t out_rows) {
  ModelSpec s;
  s.kind = ModelKind::linear;
  s.widths = {in, out};
  s.activation = Activation::identity;
  s.out_rows = out_rows;
  s.state_dim = in;
  s.validate();
  return s;
}

namespace {

std::pair<Shape, Shape> layer_shapes(const ModelSpec& s, std::size_t l) {
  const std::size_t in = s.widths[l], out = s.widths[l + 1];
  if (s.kind == ModelKind::conv) return {Shape{out, in, 2 * s.radius + 1}, Shape{out}};
  return {Shape{out, in}, Shape{out}};
}

std::size_t fan_in(const ModelSpec& s, std::size_t l) {
  return s.kind == ModelKind::conv ? s.widths[l] * (2 * s.radius + 1) : s.widths[l];
}

}  // namespace

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

void Model::validate() const {
  spec.validate();
  if (params.size() != 2 * spec.layer_count()) throw FormatError("model parameter count does not match its spec");
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto [ws, bs] = layer_shapes(spec, l);
    if (params[2 * l].shape() != ws || params[2 * l + 1].shape() != bs)
      throw FormatError("model layer " + std::to_string(l) + " has inconsistent parameter shapes");
  }
}

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  CounterRng rng(seed, 0x4D4F44454CULL);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto [ws, bs] = layer_shapes(spec, l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(spec, l)));
    for (const auto& shape : {ws, bs}) {
      std::vector<double> v(shape_size(shape));
      for (auto& x : v) x = rng.uniform(-bound, bound);
      m.params.emplace_back(shape, std::move(v));
    }
  }
  return m;
}

void zero_last_layer(Model& model) {
  const std::size_t n = model.params.size();
  for (std::size_t i = n - 2; i < n; ++i) model.params[i] = Tensor::zeros(model.params[i].shape());
}

std::vector<Var> bind(ad::Tape& tape, const Model& model, bool trainable) {
  std::vector<Var> out;
  out.reserve(model.params.size());
  for (const auto& p : model.params) out.push_back(trainable ? tape.leaf(p) : tape.constant(p));
  return out;
}

Var forward(const Model& model, std::span<const Var> params, Var x) {
  const auto& s = model.spec;
  if (params.size() != model.params.size()) throw DimensionError("forward: parameter handles do not match the model");
  const bool single = x.shape().size() == 1;
  const std::size_t in = s.input_dim();
  if (single ? x.shape()[0] != in : (x.shape().size() != 2 || x.shape()[1] != in))
    throw DimensionError("forward: input shape " + shape_string(x.shape()) + " does not match model input " +
                         std::to_string(in));
  const std::size_t batch = single ? 1 : x.shape()[0];
  Var input = single ? ad::reshape(x, {1, in}) : x;
  Var h = input;
  const std::size_t layers = s.layer_count();
  if (s.kind == ModelKind::conv) {
    h = ad::reshape(h, {batch, 1, s.state_dim});
    for (std::size_t l = 0; l < layers; ++l) {
      h = ad::circular_conv1d(h, params[2 * l], params[2 * l + 1]);
      if (l + 1 < layers) h = ad::activation(h, s.activation);
    }
    h = ad::reshape(h, {batch, s.state_dim});
  } else {
    for (std::size_t l = 0; l < layers; ++l) {
      h = ad::affine(h, params[2 * l], params[2 * l + 1]);
      if (l + 1 < layers && s.activation != Activation::identity) h = ad::activation(h, s.activation);
    }
  }
  if (s.residual) h = ad::add(input, h);
  return single ? ad::reshape(h, {s.output_dim()}) : h;
}

Var emulator_forward(const Model& model, std::span<const Var> params, Var x) {
  if (model.spec.input_dim() != model.spec.output_dim()) throw DimensionError("emulator must map R^m to R^m");
  return forward(model, params, x);
}

Var summary_forward(const Model& model, std::span<const Var> params, Var states) {
  Var y = forward(model, params, states);
  const std::size_t batch = states.shape().size() == 1 ? 1 : states.shape()[0];
  const std::size_t rows = std::max<std::size_t>(model.spec.out_rows, 1);
  const std::size_t d = model.spec.output_dim() / rows;
  return ad::reshape(y, {batch * rows, d});
}

Var critic_forward(const Model& model, std::span<const Var> params, Var points) {
  if (model.spec.output_dim() != 1) throw DimensionError("critic must output a scalar");
  Var y = forward(model, params, points);
  return ad::reshape(y, {y.size()});
}

// ---------------------------------------------------------------------------
// Tape-free evaluation with an optional forward tangent.

namespace {

void dense_layer(const Tensor& w, const Tensor& b, std::span<const double> h, std::vector<double>& z) {
  const std::size_t out = w.extent(0), in = w.extent(1);
  z.assign(out, 0.0);
  const double* wd = w.data().data();
  for (std::size_t o = 0; o < out; ++o) {
    double s = b.data().empty() ? 0.0 : b[o];
    const double* row = wd + o * in;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * h[i];
    z[o] = s;
  }
}

void conv_layer(const Tensor& k, const Tensor* b, std::span<const double> h, std::size_t m, std::vector<double>& z) {
  const std::size_t cout = k.extent(0), cin = k.extent(1), klen = k.extent(2);
  const long r = static_cast<long>(klen / 2);
  z.assign(cout * m, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < m; ++i) {
      double s = b ? (*b)[o] : 0.0;
      for (std::size_t c = 0; c < cin; ++c)
        for (long j = -r; j <= r; ++j) {
          const std::size_t idx = static_cast<std::size_t>((static_cast<long>(i) + j + static_cast<long>(m)) %
                                                           static_cast<long>(m));
          s += k[(o * cin + c) * klen + static_cast<std::size_t>(j + r)] * h[c * m + idx];
        }
      z[o * m + i] = s;
    }
}

void run_plain(const Model& model, std::span<const double> x, std::span<const double> v, std::vector<double>& y,
               std::vector<double>* ty) {
  const auto& s = model.spec;
  if (x.size() != s.input_dim()) throw DimensionError("evaluate: input length does not match model");
  std::vector<double> h(x.begin(), x.end()), t, z, tz;
  if (ty) t.assign(v.begin(), v.end());
  const std::size_t layers = s.layer_count();
  static const Tensor kNoBias;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = model.params[2 * l];
    const Tensor& b = model.params[2 * l + 1];
    if (s.kind == ModelKind::conv) {
      conv_layer(w, &b, h, s.state_dim, z);
      if (ty) conv_layer(w, nullptr, t, s.state_dim, tz);
    } else {
      dense_layer(w, b, h, z);
      if (ty) dense_layer(w, kNoBias, t, tz);
    }
    if (l + 1 < layers && s.activation != Activation::identity) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (ty) tz[i] *= ad::activate_derivative(s.activation, z[i]);
        z[i] = ad::activate(s.activation, z[i]);
      }
    }
    h.swap(z);
    if (ty) t.swap(tz);
  }
  if (s.residual) {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
    if (ty)
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += v[i];
  }
  y = std::move(h);
  if (ty) *ty = std::move(t);
}

}  // namespace

std::vector<double> evaluate(const Model& model, std::span<const double> x) {
  std::vector<double> y;
  run_plain(model, x, {}, y, nullptr);
  return y;
}

std::pair<std::vector<double>, std::vector<double>> jvp(const Model& model, std::span<const double> x,
                                                         std::span<const double> v) {
  if (v.size() != x.size()) throw DimensionError("jvp: tangent length does not match input");
  std::vector<double> y, t;
  run_plain(model, x, v, y, &t);
  return {std::move(y), std::move(t)};
}

std::vector<double> vjp(const Model& model, std::span<const double> x, std::span<const double> w) {
  ad::Tape tape;
  auto params = bind(tape, model, false);
  Var xv = tape.leaf(Tensor::vector(std::vector<double>(x.begin(), x.end())));
  Var y = forward(model, params, xv);
  if (w.size() != y.size()) throw DimensionError("vjp: cotangent length does not match output");
  tape.backward(y, Tensor(y.shape(), std::vector<double>(w.begin(), w.end())));
  return tape.grad(xv).data();
}

Tensor jacobian(const Model& model, std::span<const double> x) {
  const std::size_t in = model.spec.input_dim(), out = model.spec.output_dim();
  std::vector<double> j(out * in, 0.0), e(in, 0.0);
  for (std::size_t c = 0; c < in; ++c) {
    e[c] = 1.0;
    const auto col = jvp(model, x, e).second;
    for (std::size_t r = 0; r < out; ++r) j[r * in + c] = col[r];
    e[c] = 0.0;
  }
  return Tensor({out, in}, std::move(j));
}

void clip_weights(Model& model, double c) {
  if (!(c > 0.0)) throw InvalidArgument("clip_weights: c must be positive");
  for (auto& p : model.params) {
    auto v = p.data();
    bool changed = false;
    for (auto& x : v) {
      const double y = std::clamp(x, -c, c);
      changed |= (y != x);
      x = y;
    }
    if (changed) p = Tensor(p.shape(), std::move(v));
  }
}

double max_abs_param(const Model& model) {
  double m = 0.0;
  for (const auto& p : model.params) m = std::max(m, max_abs(p.values()));
  return m;
}

}  // namespace chaosot
