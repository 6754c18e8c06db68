#include "chaosot/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "chaosot/error.hpp"

namespace chaosot::ad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw InvalidArgument("operands belong to different tapes");
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw InvalidArgument("input recorded on another tape");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : Backward{}, {}});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_of(Var v) {
  auto& node = nodes_.at(v.id());
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.size() != 1) {
    throw DimensionError("backward requires a scalar root, got " + shape_string(root.shape()));
  }
  const double one = 1.0;
  run_backward(root.id(), std::span<const double>(&one, 1));
}

void Tape::backward(Var root, const Tensor& seed) {
  if (seed.shape() != root.shape()) throw DimensionError("backward seed shape mismatch");
  run_backward(root.id(), seed.values());
}

void Tape::run_backward(std::size_t root, std::span<const double> seed) {
  for (auto& n : nodes_) n.grad.clear();
  auto& r = nodes_.at(root);
  if (!r.requires_grad) return;
  r.grad.assign(seed.begin(), seed.end());
  for (std::size_t id = root + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor::zeros(node.value.shape());
  return Tensor(node.value.shape(), node.grad);
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  const auto& av = a.value().data();
  const auto& bv = b.value().data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    for (Var in : {a, b}) {
      auto gi = t.grad_of(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  const auto& av = a.value().data();
  const auto& bv = b.value().data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = t.grad_of(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  const auto& av = a.value().data();
  const auto& bv = b.value().data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    const auto& av = a.value().data();
    const auto& bv = b.value().data();
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    auto gb = t.grad_of(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scale(Var a, double c) {
  std::vector<double> out(a.value().data());
  for (auto& v : out) v *= c;
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a}, [a, c](Tape& t, std::span<const double> g) {
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
  });
}

Var add_scalar(Var a, double c) {
  std::vector<double> out(a.value().data());
  for (auto& v : out) v += c;
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_of(a);
    for (auto& v : ga) v += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var square(Var a) {
  std::vector<double> out(a.value().data());
  for (auto& v : out) v *= v;
  return a.tape().record(Tensor(a.shape(), std::move(out)), {a}, [a](Tape& t, std::span<const double> g) {
    const auto& av = a.value().data();
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
  });
}

Var mse(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mse");
  const auto& av = a.value().data();
  const auto& bv = b.value().data();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return a.tape().record(Tensor::scalar(s / n), {a, b}, [a, b, n](Tape& t, std::span<const double> g) {
    const auto& av = a.value().data();
    const auto& bv = b.value().data();
    const double c = 2.0 * g[0] / n;
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * (av[i] - bv[i]);
    auto gb = t.grad_of(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= c * (av[i] - bv[i]);
  });
}

Var reshape(Var a, Shape shape) {
  return a.tape().record(a.value().reshaped(std::move(shape)), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Layers

Var affine(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  const auto& W = weight.value();
  if (W.rank() != 2) throw DimensionError("affine: weight must be a matrix");
  const std::size_t out_dim = W.extent(0);
  const std::size_t in_dim = W.extent(1);
  if (bias.shape() != Shape{out_dim}) throw DimensionError("affine: bias must have shape [" + std::to_string(out_dim) + "]");
  const auto& X = x.value();
  std::size_t batch = 1;
  Shape out_shape;
  if (X.rank() == 1) {
    if (X.extent(0) != in_dim) throw DimensionError("affine: input length " + std::to_string(X.extent(0)) + " != " + std::to_string(in_dim));
    out_shape = {out_dim};
  } else if (X.rank() == 2) {
    if (X.extent(1) != in_dim) throw DimensionError("affine: input width " + std::to_string(X.extent(1)) + " != " + std::to_string(in_dim));
    batch = X.extent(0);
    out_shape = {batch, out_dim};
  } else {
    throw DimensionError("affine: input must be a vector or a batch matrix");
  }
  const auto& w = W.data();
  const auto& xb = X.data();
  const auto& bv = bias.value().data();
  std::vector<double> out(batch * out_dim);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = xb.data() + r * in_dim;
    double* yr = out.data() + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = w.data() + o * in_dim;
      double s = 0.0;
      for (std::size_t j = 0; j < in_dim; ++j) s += wo[j] * xr[j];
      yr[o] = s + bv[o];
    }
  }
  return x.tape().record(
      Tensor(std::move(out_shape), std::move(out)), {x, weight, bias},
      [x, weight, bias, batch, in_dim, out_dim](Tape& t, std::span<const double> g) {
        const auto& w = weight.value().data();
        const auto& xb = x.value().data();
        if (t.requires_grad(x)) {
          auto gx = t.grad_of(x);
          for (std::size_t r = 0; r < batch; ++r) {
            const double* gr = g.data() + r * out_dim;
            double* gxr = gx.data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double go = gr[o];
              if (go == 0.0) continue;
              const double* wo = w.data() + o * in_dim;
              for (std::size_t j = 0; j < in_dim; ++j) gxr[j] += go * wo[j];
            }
          }
        }
        if (t.requires_grad(weight)) {
          auto gw = t.grad_of(weight);
          for (std::size_t r = 0; r < batch; ++r) {
            const double* gr = g.data() + r * out_dim;
            const double* xr = xb.data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double go = gr[o];
              if (go == 0.0) continue;
              double* gwo = gw.data() + o * in_dim;
              for (std::size_t j = 0; j < in_dim; ++j) gwo[j] += go * xr[j];
            }
          }
        }
        if (t.requires_grad(bias)) {
          auto gb = t.grad_of(bias);
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
        }
      });
}

Var circular_conv1d(Var x, Var kernel) {
  if (x.value().rank() != 1 || kernel.value().rank() != 1) {
    throw DimensionError("circular_conv1d: expects a signal vector and a kernel vector");
  }
  const std::size_t m = x.size();
  const std::size_t klen = kernel.size();
  if (klen % 2 == 0) throw DimensionError("circular_conv1d: kernel length must be odd (2r+1)");
  if (klen > m) throw DimensionError("circular_conv1d: kernel longer than signal");
  auto& tape = x.tape();
  auto x3 = reshape(x, {1, 1, m});
  auto k3 = reshape(kernel, {1, 1, klen});
  auto zero = tape.constant(Tensor::zeros({1}));
  return reshape(circular_conv1d(x3, k3, zero), {m});
}

Var circular_conv1d(Var x, Var kernel, Var bias) {
  require_same_tape(x, kernel);
  require_same_tape(x, bias);
  const auto& X = x.value();
  const auto& K = kernel.value();
  if (X.rank() != 3 || K.rank() != 3) throw DimensionError("circular_conv1d: expects x [B x Cin x m] and kernel [Cout x Cin x k]");
  const std::size_t batch = X.extent(0), cin = X.extent(1), m = X.extent(2);
  const std::size_t cout = K.extent(0), klen = K.extent(2);
  if (K.extent(1) != cin) throw DimensionError("circular_conv1d: kernel input channels mismatch");
  if (klen % 2 == 0) throw DimensionError("circular_conv1d: kernel length must be odd (2r+1)");
  if (klen > m) throw DimensionError("circular_conv1d: kernel longer than signal");
  if (bias.shape() != Shape{cout}) throw DimensionError("circular_conv1d: bias must have shape [Cout]");
  const long r = static_cast<long>(klen / 2);
  const long lm = static_cast<long>(m);
  const auto& xv = X.data();
  const auto& kv = K.data();
  const auto& bv = bias.value().data();
  std::vector<double> out(batch * cout * m);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* y = out.data() + (b * cout + co) * m;
      for (std::size_t i = 0; i < m; ++i) y[i] = bv[co];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xs = xv.data() + (b * cin + ci) * m;
        const double* ks = kv.data() + (co * cin + ci) * klen;
        for (long j = -r; j <= r; ++j) {
          const double kj = ks[j + r];
          for (long i = 0; i < lm; ++i) {
            long src = i + j;
            if (src < 0) src += lm;
            else if (src >= lm) src -= lm;
            y[i] += kj * xs[src];
          }
        }
      }
    }
  }
  return x.tape().record(
      Tensor({batch, cout, m}, std::move(out)), {x, kernel, bias},
      [x, kernel, bias, batch, cin, cout, m, klen, r](Tape& t, std::span<const double> g) {
        const long lm = static_cast<long>(m);
        const auto& xv = x.value().data();
        const auto& kv = kernel.value().data();
        const bool gx_on = t.requires_grad(x), gk_on = t.requires_grad(kernel);
        std::span<double> gx = gx_on ? t.grad_of(x) : std::span<double>{};
        std::span<double> gk = gk_on ? t.grad_of(kernel) : std::span<double>{};
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gy = g.data() + (b * cout + co) * m;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* xs = xv.data() + (b * cin + ci) * m;
              const double* ks = kv.data() + (co * cin + ci) * klen;
              for (long j = -r; j <= r; ++j) {
                double acc = 0.0;
                const double kj = ks[j + r];
                double* gxs = gx_on ? gx.data() + (b * cin + ci) * m : nullptr;
                for (long i = 0; i < lm; ++i) {
                  long src = i + j;
                  if (src < 0) src += lm;
                  else if (src >= lm) src -= lm;
                  acc += gy[i] * xs[src];
                  if (gxs) gxs[src] += kj * gy[i];
                }
                if (gk_on) gk[(co * cin + ci) * klen + static_cast<std::size_t>(j + r)] += acc;
              }
            }
          }
        }
        if (t.requires_grad(bias)) {
          auto gb = t.grad_of(bias);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t co = 0; co < cout; ++co)
              for (std::size_t i = 0; i < m; ++i) gb[co] += g[(b * cout + co) * m + i];
        }
      });
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::identity: return 1.0;
    // Subgradient at the kink is 0.
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::gelu:
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    case Activation::tanh: {
      const double th = std::tanh(x);
      return 1.0 - th * th;
    }
  }
  return 1.0;
}

Var activation(Var x, Activation kind) {
  if (kind == Activation::identity) return x;
  std::vector<double> out(x.value().data());
  for (auto& v : out) v = activate(kind, v);
  return x.tape().record(Tensor(x.shape(), std::move(out)), {x}, [x, kind](Tape& t, std::span<const double> g) {
    const auto& xv = x.value().data();
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * activate_derivative(kind, xv[i]);
  });
}

Var softplus(Var x, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("softplus: beta must be positive");
  std::vector<double> out(x.value().data());
  for (auto& v : out) {
    const double z = beta * v;
    v = (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
  }
  return x.tape().record(Tensor(x.shape(), std::move(out)), {x}, [x, beta](Tape& t, std::span<const double> g) {
    const auto& xv = x.value().data();
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double z = beta * xv[i];
      const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      gx[i] += g[i] * sig;
    }
  });
}

Var roll(Var x, long shift) {
  const auto& X = x.value();
  const std::size_t m = X.shape().back();
  const std::size_t rows = X.size() / m;
  const long lm = static_cast<long>(m);
  const long s = ((shift % lm) + lm) % lm;
  std::vector<double> out(X.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (long i = 0; i < lm; ++i) out[r * m + i] = X.data()[r * m + (i + s) % lm];
  return x.tape().record(Tensor(X.shape(), std::move(out)), {x}, [x, rows, m, s](Tape& t, std::span<const double> g) {
    const long lm = static_cast<long>(m);
    auto gx = t.grad_of(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (long i = 0; i < lm; ++i) gx[r * m + (i + s) % lm] += g[r * m + i];
  });
}

Var stack_features(std::span<const Var> features) {
  if (features.empty()) throw DimensionError("stack_features: no features");
  const auto& shape = features[0].shape();
  if (shape.size() != 2) throw DimensionError("stack_features: features must be [B x m]");
  for (const auto& f : features) {
    if (f.shape() != shape) throw DimensionError("stack_features: feature shapes differ");
    require_same_tape(f, features[0]);
  }
  const std::size_t n = shape[0] * shape[1];
  const std::size_t k = features.size();
  std::vector<double> out(n * k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& fv = features[c].value().data();
    for (std::size_t i = 0; i < n; ++i) out[i * k + c] = fv[i];
  }
  std::vector<Var> inputs(features.begin(), features.end());
  return features[0].tape().record(Tensor({n, k}, std::move(out)), inputs,
                                   [inputs, n, k](Tape& t, std::span<const double> g) {
                                     for (std::size_t c = 0; c < k; ++c) {
                                       auto gf = t.grad_of(inputs[c]);
                                       for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += g[i * k + c];
                                     }
                                   });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const auto& X = x.value();
  if (X.rank() != 2) throw DimensionError("gather_rows: expects a matrix");
  const std::size_t n = X.extent(0), d = X.extent(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  if (idx.empty()) throw DimensionError("gather_rows: empty selection");
  std::vector<double> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(X.data().data() + idx[r] * d, d, out.data() + r * d);
  }
  const std::size_t count = idx.size();
  return x.tape().record(Tensor({count, d}, std::move(out)), {x}, [x, idx = std::move(idx), d](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(x);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) gx[idx[r] * d + c] += g[r * d + c];
  });
}

Var concat_rows(Var a, Var b) {
  require_same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.extent(1) != B.extent(1)) throw DimensionError("concat_rows: column mismatch");
  std::vector<double> out(A.data());
  out.insert(out.end(), B.data().begin(), B.data().end());
  const std::size_t na = A.size();
  return a.tape().record(Tensor({A.extent(0) + B.extent(0), A.extent(1)}, std::move(out)), {a, b},
                         [a, b, na](Tape& t, std::span<const double> g) {
                           auto ga = t.grad_of(a);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                           auto gb = t.grad_of(b);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                         });
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, GradCheckOptions options) {
  if (!(options.step > 0.0)) throw InvalidArgument("grad_check: step must be positive");
  std::vector<double> analytic;
  {
    Tape tape;
    auto xv = tape.leaf(x);
    auto y = f(tape, xv);
    tape.backward(y);
    analytic = tape.grad(xv).data();
  }
  auto eval_at = [&](const std::vector<double>& v) {
    Tape tape;
    auto xv = tape.constant(Tensor(x.shape(), v));
    return f(tape, xv).value().item();
  };
  const std::size_t n = x.size();
  std::size_t stride = 1;
  if (options.max_coords > 0 && n > options.max_coords) stride = (n + options.max_coords - 1) / options.max_coords;
  GradCheckResult res;
  std::vector<double> probe(x.data());
  for (std::size_t i = 0; i < n; i += stride) {
    const double orig = probe[i];
    probe[i] = orig + options.step;
    const double fp = eval_at(probe);
    probe[i] = orig - options.step;
    const double fm = eval_at(probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * options.step);
    if (options.skip_kinks) {
      const double h = 0.25 * options.step;
      probe[i] = orig + h;
      const double gp = eval_at(probe);
      probe[i] = orig - h;
      const double gm = eval_at(probe);
      probe[i] = orig;
      const double fine = (gp - gm) / (2.0 * h);
      if (std::abs(fine - numeric) > options.kink_tol * std::max(options.floor, std::abs(numeric))) {
        ++res.skipped;
        continue;
      }
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    ++res.checked;
    if (res.checked == 1 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = analytic[i];
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace chaosot::ad
