#include "chaosot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "chaosot/error.hpp"
#include "chaosot/fft.hpp"
#include "chaosot/rng.hpp"

namespace chaosot {

double relative_rmse(std::span<const double> preds, std::span<const double> targets, std::size_t m) {
  if (m == 0 || preds.size() != targets.size() || targets.size() % m != 0 || targets.empty())
    throw DimensionError("relative_rmse: prediction and target shapes differ");
  const std::size_t rows = targets.size() / m;
  double acc = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double tv = targets[t * m + i], e = tv - preds[t * m + i];
      num += e * e;
      den += tv * tv;
    }
    if (den == 0.0) throw NumericalError("relative_rmse: zero-norm target at row " + std::to_string(t));
    acc += std::sqrt(num / den);
  }
  return acc / static_cast<double>(rows);
}

double spectral_distance(const Trajectory& truth, const Trajectory& pred) {
  if (truth.steps != pred.steps || truth.dim != pred.dim)
    throw DimensionError("spectral_distance: trajectories differ in shape");
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.steps; ++t) {
    const auto et = energy_spectrum(truth.row(t));
    const auto ep = energy_spectrum(pred.row(t));
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < et.size(); ++k) {
      num += std::abs(et[k] - ep[k]);
      den += et[k];
    }
    if (den == 0.0) throw NumericalError("spectral_distance: zero spectrum at step " + std::to_string(t));
    acc += num / den;
  }
  return acc / static_cast<double>(truth.steps);
}

Tensor spectral_derivative_matrix(std::size_t m, double length, int order) {
  if (!is_power_of_two(m)) throw DimensionError("spectral derivative: grid must be a power of two");
  if (order != 1 && order != 2) throw InvalidArgument("spectral derivative: order must be 1 or 2");
  if (!(length > 0.0)) throw InvalidArgument("spectral derivative: domain length must be positive");
  std::vector<double> d(m * m), e(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    e[j] = 1.0;
    auto spec = fft_real(e);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double q = 2.0 * M_PI * static_cast<double>(k) / length;
      if (order == 1)
        spec[k] *= (k == m / 2) ? Complex(0.0) : Complex(0.0, q);
      else
        spec[k] *= -q * q;
    }
    const auto col = ifft_real(spec, m);
    for (std::size_t i = 0; i < m; ++i) d[i * m + j] = col[i];
    e[j] = 0.0;
  }
  return Tensor({m, m}, std::move(d));
}

PointCloud fixed_summary_cloud(const Trajectory& traj, double ks_length) {
  if (traj.steps < 3) throw InvalidArgument("fixed summary needs at least 3 time steps");
  const std::size_t m = traj.dim, T = traj.steps;
  std::vector<double> pts;
  switch (traj.system) {
    case SystemKind::l96: {
      pts.reserve((T - 2) * m * 3);
      for (std::size_t t = 1; t + 1 < T; ++t) {
        const auto u = traj.row(t), up = traj.row(t + 1), um = traj.row(t - 1);
        for (std::size_t i = 0; i < m; ++i) {
          pts.push_back((up[i] - um[i]) / (2.0 * traj.dt));
          pts.push_back((u[(i + 1) % m] - u[(i + m - 2) % m]) * u[(i + m - 1) % m]);
          pts.push_back(u[i]);
        }
      }
      return PointCloud((T - 2) * m, 3, std::move(pts));
    }
    case SystemKind::ks: {
      if (!(ks_length > 0.0)) throw InvalidArgument("KS fixed summary needs the domain length");
      const Tensor d1 = spectral_derivative_matrix(m, ks_length, 1);
      const Tensor d2 = spectral_derivative_matrix(m, ks_length, 2);
      pts.reserve((T - 2) * m * 3);
      for (std::size_t t = 1; t + 1 < T; ++t) {
        const auto u = traj.row(t), up = traj.row(t + 1), um = traj.row(t - 1);
        const auto ux = matvec(d1, u), uxx = matvec(d2, u);
        for (std::size_t i = 0; i < m; ++i) {
          pts.push_back((up[i] - um[i]) / (2.0 * traj.dt));
          pts.push_back(ux[i]);
          pts.push_back(uxx[i]);
        }
      }
      return PointCloud((T - 2) * m, 3, std::move(pts));
    }
    case SystemKind::l63:
      for (std::size_t t = 1; t + 1 < T; ++t) {
        const auto u = traj.row(t);
        pts.insert(pts.end(), u.begin(), u.end());
      }
      return PointCloud(T - 2, m, std::move(pts));
    case SystemKind::generic:
      break;
  }
  throw InvalidArgument("fixed summary is defined for l63, l96 and ks trajectories only");
}

ad::Var fixed_summary_on_tape(SystemKind system, ad::Var inputs, ad::Var preds, double dt, double ks_length) {
  if (inputs.shape() != preds.shape() || preds.shape().size() != 2)
    throw DimensionError("fixed summary: inputs and predictions must be matching [B x m] batches");
  auto& tape = preds.tape();
  const std::size_t m = preds.shape()[1];
  if (system == SystemKind::l63) return preds;
  ad::Var dudt = ad::scale(ad::sub(preds, inputs), 1.0 / dt);
  if (system == SystemKind::l96) {
    ad::Var adv = ad::mul(ad::sub(ad::roll(preds, 1), ad::roll(preds, -2)), ad::roll(preds, -1));
    const ad::Var feats[] = {dudt, adv, preds};
    return ad::stack_features(feats);
  }
  if (system == SystemKind::ks) {
    ad::Var zero = tape.constant(Tensor::zeros({m}));
    ad::Var ux = ad::affine(preds, tape.constant(spectral_derivative_matrix(m, ks_length, 1)), zero);
    ad::Var uxx = ad::affine(preds, tape.constant(spectral_derivative_matrix(m, ks_length, 2)), zero);
    const ad::Var feats[] = {dudt, ux, uxx};
    return ad::stack_features(feats);
  }
  throw InvalidArgument("fixed summary is defined for l63, l96 and ks only");
}

double l1_hist_error(const PointCloud& truth, const PointCloud& pred, std::size_t bins) {
  if (truth.d != pred.d) throw DimensionError("l1_hist_error: clouds have different dimensions");
  if (bins < 2) throw InvalidArgument("l1_hist_error: need at least 2 bins");
  double total = 0.0;
  for (std::size_t c = 0; c < truth.d; ++c) {
    double lo = truth.points[c], hi = lo;
    for (std::size_t i = 0; i < truth.n; ++i) {
      lo = std::min(lo, truth.points[i * truth.d + c]);
      hi = std::max(hi, truth.points[i * truth.d + c]);
    }
    if (!(hi > lo)) throw NumericalError("l1_hist_error: degenerate range in component " + std::to_string(c));
    auto histogram = [&](const PointCloud& cl) {
      std::vector<double> h(bins, 0.0);
      for (std::size_t i = 0; i < cl.n; ++i) {
        const double x = cl.points[i * cl.d + c];
        const double pos = (x - lo) / (hi - lo) * static_cast<double>(bins);
        const long b = std::clamp(static_cast<long>(std::floor(pos)), 0L, static_cast<long>(bins) - 1);
        h[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(cl.n);
      }
      return h;
    };
    const auto p = histogram(truth), q = histogram(pred);
    for (std::size_t b = 0; b < bins; ++b) total += std::abs(p[b] - q[b]);
  }
  return total / static_cast<double>(truth.d);
}

BenettinResult benettin_lle(const StepFn& step, const State& u0, const BenettinOptions& o) {
  if (!(o.d0 > 0.0) || !(o.band_lo < o.band_hi) || !(o.dt > 0.0) || o.horizon == 0)
    throw InvalidArgument("benettin: invalid options");
  auto guarded = [&](State& u, std::size_t t) {
    step(u);
    for (double x : u)
      if (!std::isfinite(x) || std::abs(x) > kBlowUpThreshold)
        throw BlowUpError("benettin: trajectory blew up at step " + std::to_string(t), static_cast<long>(t));
  };
  State u = u0;
  for (std::size_t t = 0; t < o.warmup; ++t) guarded(u, t + 1);
  CounterRng rng(o.seed, 0x4C4C45ULL);
  std::vector<double> dir(u.size());
  for (auto& x : dir) x = rng.normal();
  const double nrm = l2_norm(dir);
  State w = u;
  for (std::size_t i = 0; i < u.size(); ++i) w[i] += o.d0 * dir[i] / nrm;

  BenettinResult r;
  double sum = 0.0, d = o.d0;
  for (std::size_t t = 1; t <= o.horizon; ++t) {
    guarded(u, o.warmup + t);
    guarded(w, o.warmup + t);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (w[i] - u[i]) * (w[i] - u[i]);
    d = std::sqrt(s);
    if (d < o.band_lo || d > o.band_hi) {
      if (d == 0.0) throw NumericalError("benettin: perturbation collapsed to zero at step " + std::to_string(t));
      sum += std::log(d / o.d0);
      for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] + (w[i] - u[i]) * (o.d0 / d);
      d = o.d0;
      ++r.rescalings;
    }
  }
  if (o.count_final_segment) sum += std::log(d / o.d0);
  r.lle = sum / (static_cast<double>(o.horizon) * o.dt);
  return r;
}

StepFn model_step_fn(const Model& model) {
  return [model](State& u) { u = evaluate(model, u); };
}

Trajectory rollout(const Model& model, const State& u0, std::size_t steps, double dt, SystemKind tag) {
  if (u0.size() != model.spec.input_dim()) throw DimensionError("rollout: initial state does not match the model");
  return simulate(model_step_fn(model), tag, u0, steps, dt, 0);
}

DisplacementCovariance displacement_covariance(const PointCloud& x, const PointCloud& y) {
  if (x.d != y.d) throw DimensionError("displacement_covariance: clouds have different dimensions");
  const auto ot = exact_ot(x, y, 2.0);
  const std::size_t d = x.d;
  std::vector<double> c(d * d, 0.0);
  for (std::size_t i = 0; i < x.n; ++i) {
    const auto xi = x.point(i), yj = y.point(ot.assignment[i]);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c[a * d + b] += (xi[a] - yj[a]) * (xi[b] - yj[b]) / x.n;
  }
  DisplacementCovariance out;
  out.matrix = Tensor({d, d}, c);
  out.eigen = jacobi_eigen(c, d);
  out.assignment = ot.assignment;
  out.ot_cost = ot.cost;
  return out;
}

double gaussian_kappa(double p, std::size_t d, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0 || d == 0 || !(p > 0.0)) throw InvalidArgument("gaussian_kappa: invalid arguments");
  CounterRng rng(seed, 0x4B415050ULL);
  double acc = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double z = rng.normal();
      r2 += z * z;
    }
    acc += std::pow(r2, 0.5 * p);
  }
  return std::pow(acc / static_cast<double>(n_samples), 1.0 / p);
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out << "metric,setting,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.metric << ',' << r.setting << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace chaosot
