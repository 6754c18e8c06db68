#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "chaosot/error.hpp"
#include "chaosot/ot.hpp"

namespace chaosot {

namespace {

// Unrolled iterations, kept so the reverse pass can rebuild each softmax.
struct History {
  std::vector<double> eps;                // per iteration
  std::vector<std::vector<double>> a, b;  // potentials entering iteration k (b unused when symmetric)
  double value = 0.0;
};

double max_entry(const std::vector<double>& c) {
  double mx = 0.0;
  for (double v : c) mx = std::max(mx, v);
  return mx;
}

double eps_at(const SinkhornOptions& o, double start, int k) {
  if (o.anneal <= 0.0) return o.epsilon;
  return std::max(o.epsilon, start * std::pow(o.anneal, k));
}

// Softmax weights along one row (or column) of C for potential `pot`.
void softmax_line(const double* c, std::size_t stride, std::span<const double> pot, double eps,
                  std::vector<double>& w) {
  const std::size_t len = pot.size();
  w.resize(len);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, (pot[j] - c[j * stride]) / eps);
  double s = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    w[j] = std::exp((pot[j] - c[j * stride]) / eps - mx);
    s += w[j];
  }
  for (auto& x : w) x /= s;
}

double softmin_line(const double* c, std::size_t stride, std::span<const double> pot, double eps, double log_w) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pot.size(); ++j) mx = std::max(mx, (pot[j] - c[j * stride]) / eps);
  double s = 0.0;
  for (std::size_t j = 0; j < pot.size(); ++j) s += std::exp((pot[j] - c[j * stride]) / eps - mx);
  return -eps * (mx + std::log(s) + log_w);
}

void require_finite(std::span<const double> v, int iter) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError("sinkhorn: non-finite potential at iteration " + std::to_string(iter));
}

History run_cross(const std::vector<double>& c, std::size_t n, std::size_t m, const SinkhornOptions& o) {
  History h;
  const double start = max_entry(c);
  std::vector<double> f(n, 0.0), g(m, 0.0), fn(n), gn(m);
  for (int k = 0; k < o.max_iter; ++k) {
    const double eps = eps_at(o, start, k);
    for (std::size_t i = 0; i < n; ++i)
      fn[i] = 0.5 * (f[i] + softmin_line(c.data() + i * m, 1, g, eps, std::log(1.0 / m)));
    for (std::size_t j = 0; j < m; ++j)
      gn[j] = 0.5 * (g[j] + softmin_line(c.data() + j, m, f, eps, std::log(1.0 / n)));
    require_finite(fn, k + 1);
    require_finite(gn, k + 1);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(fn[i] - f[i]));
    for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(gn[j] - g[j]));
    h.eps.push_back(eps);
    h.a.push_back(f);
    h.b.push_back(g);
    f = fn;
    g = gn;
    if (eps == o.epsilon && change < o.tol) break;
  }
  double v = 0.0;
  for (double x : f) v += x / n;
  for (double x : g) v += x / m;
  h.value = v;
  return h;
}

History run_symmetric(const std::vector<double>& c, std::size_t n, const SinkhornOptions& o) {
  History h;
  const double start = max_entry(c);
  std::vector<double> f(n, 0.0), next(n);
  for (int k = 0; k < o.max_iter; ++k) {
    const double eps = eps_at(o, start, k);
    for (std::size_t i = 0; i < n; ++i)
      next[i] = 0.5 * (f[i] + softmin_line(c.data() + i * n, 1, f, eps, std::log(1.0 / n)));
    require_finite(next, k + 1);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - f[i]));
    h.eps.push_back(eps);
    h.a.push_back(f);
    f = next;
    if (eps == o.epsilon && change < o.tol) break;
  }
  double v = 0.0;
  for (double x : f) v += 2.0 * x / n;
  h.value = v;
  return h;
}

// dValue/dC for the cross problem, scaled by `weight`, accumulated into cbar.
void cross_cost_grad(const std::vector<double>& c, std::size_t n, std::size_t m, const History& h, double weight,
                     std::vector<double>& cbar) {
  std::vector<double> fbar(n, weight / n), gbar(m, weight / m), fnext(n), gnext(m), w;
  for (std::size_t kk = h.eps.size(); kk-- > 0;) {
    const double eps = h.eps[kk];
    for (std::size_t i = 0; i < n; ++i) fnext[i] = 0.5 * fbar[i];
    for (std::size_t j = 0; j < m; ++j) gnext[j] = 0.5 * gbar[j];
    for (std::size_t j = 0; j < m; ++j) {
      if (gbar[j] == 0.0) continue;
      softmax_line(c.data() + j, m, h.a[kk], eps, w);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = 0.5 * gbar[j] * w[i];
        fnext[i] -= t;
        cbar[i * m + j] += t;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (fbar[i] == 0.0) continue;
      softmax_line(c.data() + i * m, 1, h.b[kk], eps, w);
      for (std::size_t j = 0; j < m; ++j) {
        const double t = 0.5 * fbar[i] * w[j];
        gnext[j] -= t;
        cbar[i * m + j] += t;
      }
    }
    fbar.swap(fnext);
    gbar.swap(gnext);
  }
}

void symmetric_cost_grad(const std::vector<double>& c, std::size_t n, const History& h, double weight,
                         std::vector<double>& cbar) {
  std::vector<double> fbar(n, 2.0 * weight / n), next(n), w;
  for (std::size_t kk = h.eps.size(); kk-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * fbar[i];
    for (std::size_t i = 0; i < n; ++i) {
      if (fbar[i] == 0.0) continue;
      softmax_line(c.data() + i * n, 1, h.a[kk], h.eps[kk], w);
      for (std::size_t j = 0; j < n; ++j) {
        const double t = 0.5 * fbar[i] * w[j];
        next[j] -= t;
        cbar[i * n + j] += t;
      }
    }
    fbar.swap(next);
  }
}

std::vector<double> cost_matrix(std::span<const double> x, std::size_t n, std::span<const double> y, std::size_t m,
                                std::size_t d, double p) {
  std::vector<double> c(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double r = x[i * d + k] - y[j * d + k];
        s += r * r;
      }
      c[i * m + j] = (p == 2.0) ? s : std::pow(std::sqrt(s), p);
    }
  return c;
}

// Pushes dL/dC_ij into the coordinates of x_i (+) and y_j (-).
void cost_to_points(const std::vector<double>& cbar, std::span<const double> x, std::size_t n,
                    std::span<const double> y, std::size_t m, std::size_t d, double p, std::span<double> xbar,
                    std::span<double> ybar) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double cb = cbar[i * m + j];
      if (cb == 0.0) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double r = x[i * d + k] - y[j * d + k];
        s += r * r;
      }
      double coef;
      if (p == 2.0) {
        coef = 2.0;
      } else {
        if (s == 0.0) continue;
        coef = p * std::pow(s, 0.5 * p - 1.0);
      }
      for (std::size_t k = 0; k < d; ++k) {
        const double t = cb * coef * (x[i * d + k] - y[j * d + k]);
        if (!xbar.empty()) xbar[i * d + k] += t;
        if (!ybar.empty()) ybar[j * d + k] -= t;
      }
    }
}

std::pair<std::size_t, std::size_t> cloud_shape(const ad::Var& v) {
  const auto& s = v.shape();
  if (s.size() == 1) return {s[0], 1};
  if (s.size() != 2) throw DimensionError("sinkhorn_divergence: point sets must be [n x d]");
  return {s[0], s[1]};
}

}  // namespace

ad::Var sinkhorn_divergence(ad::Var xv, ad::Var yv, double p, const SinkhornOptions& o) {
  if (!(o.epsilon > 0.0) || o.max_iter < 1) throw InvalidArgument("sinkhorn: invalid options");
  if (!(p >= 1.0)) throw InvalidArgument("sinkhorn_divergence: p must be >= 1");
  const auto [n, d] = cloud_shape(xv);
  const auto [m, dy] = cloud_shape(yv);
  if (d != dy) throw DimensionError("sinkhorn_divergence: clouds have different dimensions");
  const auto x = xv.value().values();
  const auto y = yv.value().values();

  auto cxy = std::make_shared<std::vector<double>>(cost_matrix(x, n, y, m, d, p));
  auto cxx = std::make_shared<std::vector<double>>(cost_matrix(x, n, x, n, d, p));
  auto cyy = std::make_shared<std::vector<double>>(cost_matrix(y, m, y, m, d, p));
  auto hxy = std::make_shared<History>(run_cross(*cxy, n, m, o));
  auto hxx = std::make_shared<History>(run_symmetric(*cxx, n, o));
  auto hyy = std::make_shared<History>(run_symmetric(*cyy, m, o));
  const double value = hxy->value - 0.5 * hxx->value - 0.5 * hyy->value;

  auto& tape = xv.tape();
  return tape.record(Tensor::scalar(value), {xv, yv},
                     [xv, yv, n = n, m = m, d = d, p, cxy, cxx, cyy, hxy, hxx, hyy](ad::Tape& t,
                                                                                   std::span<const double> out) {
                       const double gbar = out[0];
                       const auto x = xv.value().values();
                       const auto y = yv.value().values();
                       std::span<double> xbar = t.requires_grad(xv) ? t.grad_of(xv) : std::span<double>{};
                       std::span<double> ybar = t.requires_grad(yv) ? t.grad_of(yv) : std::span<double>{};
                       std::vector<double> cb(n * m, 0.0);
                       cross_cost_grad(*cxy, n, m, *hxy, gbar, cb);
                       cost_to_points(cb, x, n, y, m, d, p, xbar, ybar);
                       if (!xbar.empty()) {
                         std::vector<double> cbx(n * n, 0.0);
                         symmetric_cost_grad(*cxx, n, *hxx, -0.5 * gbar, cbx);
                         cost_to_points(cbx, x, n, x, n, d, p, xbar, xbar);
                       }
                       if (!ybar.empty()) {
                         std::vector<double> cby(m * m, 0.0);
                         symmetric_cost_grad(*cyy, m, *hyy, -0.5 * gbar, cby);
                         cost_to_points(cby, y, m, y, m, d, p, ybar, ybar);
                       }
                     });
}

}  // namespace chaosot
