#include "chaosot/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "chaosot/error.hpp"
#include "chaosot/linalg.hpp"
#include "chaosot/rng.hpp"

namespace chaosot {

namespace {

std::vector<double> random_unit(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 0x504F574552ULL);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  const double nrm = l2_norm(v);
  for (auto& x : v) x /= nrm;
  return v;
}

double normalize(std::vector<double>& v) {
  const double n = l2_norm(v);
  if (n > 0.0)
    for (auto& x : v) x /= n;
  return n;
}

// Generic power iteration given A v and A^T u.
template <typename Fwd, typename Adj>
PowerIteration power_generic(std::size_t in, Fwd apply, Adj apply_t, int iters, std::uint64_t seed, double tol) {
  if (iters < 1) throw InvalidArgument("power iteration needs iters >= 1");
  PowerIteration r;
  r.v = random_unit(in, seed);
  double prev = -1.0;
  for (int k = 0; k < iters; ++k) {
    r.u = apply(r.v);
    const double s = normalize(r.u);
    r.iterations = k + 1;
    if (s == 0.0) {
      r.sigma = 0.0;
      return r;
    }
    r.v = apply_t(r.u);
    r.sigma = normalize(r.v);
    if (tol > 0.0 && std::abs(r.sigma - prev) <= tol * r.sigma) break;
    prev = r.sigma;
  }
  // Refresh u against the final v so sigma = u^T A v exactly.
  r.u = apply(r.v);
  r.sigma = normalize(r.u);
  return r;
}

}  // namespace

PowerIteration power_iteration(const Tensor& w, int iters, std::uint64_t seed, double tol) {
  if (w.rank() != 2) throw DimensionError("spectral_norm: expected a matrix");
  return power_generic(
      w.extent(1), [&](const std::vector<double>& v) { return matvec(w, v); },
      [&](const std::vector<double>& u) { return matvec_transposed(w, u); }, iters, seed, tol);
}

double spectral_norm(const Tensor& w, int iters, std::uint64_t seed) { return power_iteration(w, iters, seed).sigma; }

ad::Var spectral_norm(ad::Var w, int iters, std::uint64_t seed) {
  auto pi = std::make_shared<PowerIteration>(power_iteration(w.value(), iters, seed));
  const std::size_t cols = w.value().extent(1);
  return w.tape().record(Tensor::scalar(pi->sigma), {w}, [w, pi, cols](ad::Tape& t, std::span<const double> g) {
    if (pi->sigma == 0.0) return;
    auto gw = t.grad_of(w);
    for (std::size_t i = 0; i < pi->u.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) gw[i * cols + j] += g[0] * pi->u[i] * pi->v[j];
  });
}

namespace {

std::vector<double> conv_apply(const Tensor& k, std::span<const double> h, std::size_t m, bool adjoint) {
  const std::size_t cout = k.extent(0), cin = k.extent(1), klen = k.extent(2);
  const long r = static_cast<long>(klen / 2);
  const long mm = static_cast<long>(m);
  std::vector<double> z((adjoint ? cin : cout) * m, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t c = 0; c < cin; ++c)
      for (long j = -r; j <= r; ++j) {
        const double kv = k[(o * cin + c) * klen + static_cast<std::size_t>(j + r)];
        for (long i = 0; i < mm; ++i) {
          const std::size_t src = static_cast<std::size_t>((i + j + mm) % mm);
          if (adjoint)
            z[c * m + src] += kv * h[o * m + static_cast<std::size_t>(i)];
          else
            z[o * m + static_cast<std::size_t>(i)] += kv * h[c * m + src];
        }
      }
  return z;
}

}  // namespace

double conv_operator_norm(const Tensor& kernel, std::size_t m, int iters, std::uint64_t seed) {
  if (kernel.rank() != 3) throw DimensionError("conv_operator_norm: kernel must be [Cout x Cin x k]");
  return power_generic(
             kernel.extent(1) * m, [&](const std::vector<double>& v) { return conv_apply(kernel, v, m, false); },
             [&](const std::vector<double>& u) { return conv_apply(kernel, u, m, true); }, iters, seed, 0.0)
      .sigma;
}

double activation_lipschitz(ad::Activation act) { return act == ad::Activation::gelu ? 1.13 : 1.0; }

double lipschitz_upper(const Model& model, int iters) {
  const auto& s = model.spec;
  double bound = 1.0;
  for (std::size_t l = 0; l < s.layer_count(); ++l) {
    const Tensor& w = model.weight(l);
    bound *= s.kind == ModelKind::conv ? conv_operator_norm(w, s.state_dim, iters, l) : spectral_norm(w, iters, l);
    if (l + 1 < s.layer_count()) bound *= activation_lipschitz(s.activation);
  }
  return s.residual ? 1.0 + bound : bound;
}

ad::Var lipschitz_upper(const Model& model, std::span<const ad::Var> params, int iters) {
  const auto& s = model.spec;
  if (s.kind == ModelKind::conv) throw InvalidArgument("differentiable upper bound supports dense models only");
  ad::Var bound = spectral_norm(params[0], iters, 0);
  for (std::size_t l = 1; l < s.layer_count(); ++l)
    bound = ad::mul(ad::scale(bound, activation_lipschitz(s.activation)), spectral_norm(params[2 * l], iters, l));
  return s.residual ? ad::add_scalar(bound, 1.0) : bound;
}

PowerIteration jacobian_power_iteration(const Model& model, std::span<const double> x, int iters, double tol,
                                        std::uint64_t seed) {
  return power_generic(
      model.spec.input_dim(), [&](const std::vector<double>& v) { return jvp(model, x, v).second; },
      [&](const std::vector<double>& u) { return vjp(model, x, u); }, iters, seed, tol);
}

double jacobian_spectral_norm(const Model& model, std::span<const double> x, int iters) {
  return jacobian_power_iteration(model, x, iters).sigma;
}

double lipschitz_lower(const Model& model, std::span<const std::vector<double>> batch, LowerMode mode, int iters) {
  if (batch.empty()) throw InvalidArgument("lipschitz_lower: empty batch");
  double acc = 0.0;
  for (const auto& x : batch) {
    const double s = jacobian_spectral_norm(model, x, iters);
    acc = mode == LowerMode::mean ? acc + s : std::max(acc, s);
  }
  return mode == LowerMode::mean ? acc / static_cast<double>(batch.size()) : acc;
}

ad::Var lipschitz_lower_on_tape(const Model& model, std::span<const ad::Var> params,
                                std::span<const std::vector<double>> batch, int iters, double h) {
  if (batch.empty()) throw InvalidArgument("lipschitz_lower: empty batch");
  const std::size_t in = model.spec.input_dim(), out = model.spec.output_dim(), b = batch.size();
  std::vector<double> plus(b * in), minus(b * in), left(b * out);
  for (std::size_t k = 0; k < b; ++k) {
    const auto pi = jacobian_power_iteration(model, batch[k], iters);
    for (std::size_t i = 0; i < in; ++i) {
      plus[k * in + i] = batch[k][i] + h * pi.v[i];
      minus[k * in + i] = batch[k][i] - h * pi.v[i];
    }
    std::copy(pi.u.begin(), pi.u.end(), left.begin() + static_cast<long>(k * out));
  }
  auto& tape = params[0].tape();
  ad::Var yp = forward(model, params, tape.constant(Tensor({b, in}, std::move(plus))));
  ad::Var ym = forward(model, params, tape.constant(Tensor({b, in}, std::move(minus))));
  ad::Var u = tape.constant(Tensor({b, out}, std::move(left)));
  return ad::scale(ad::sum(ad::mul(u, ad::sub(yp, ym))), 1.0 / (2.0 * h * static_cast<double>(b)));
}

double smooth_hinge(double x, double beta) {
  const double z = beta * x;
  return (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) / beta;
}

ad::Var hinge_lip_reg(const Model& model, std::span<const ad::Var> params,
                      std::span<const std::vector<double>> batch, const HingeReg& reg) {
  if (!(reg.l_min >= 0.0 && reg.l_min < reg.l_max)) throw InvalidArgument("hinge_lip_reg: need 0 <= L_min < L_max");
  if (!(reg.beta > 0.0)) throw InvalidArgument("hinge_lip_reg: beta must be positive");
  ad::Var upper = lipschitz_upper(model, params);
  ad::Var lower = lipschitz_lower_on_tape(model, params, batch);
  ad::Var a = ad::softplus(ad::add_scalar(upper, -reg.l_max), reg.beta);
  ad::Var b = ad::softplus(ad::add_scalar(ad::scale(lower, -1.0), reg.l_min), reg.beta);
  return ad::add(a, b);
}

}  // namespace chaosot
