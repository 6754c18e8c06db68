#include "chaosot/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "chaosot/error.hpp"

namespace chaosot {

PointCloud::PointCloud(std::size_t n_, std::size_t d_, std::vector<double> pts)
    : n(n_), d(d_), points(std::move(pts)) {
  if (n == 0 || d == 0) throw DimensionError("point cloud needs at least one point and dimension");
  if (points.size() != n * d) throw DimensionError("point cloud storage does not match n x d");
  for (double v : points)
    if (!std::isfinite(v)) throw NumericalError("point cloud has non-finite coordinates");
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() == 1) return PointCloud(t.size(), 1, t.data());
  if (t.rank() != 2) throw DimensionError("point cloud tensor must be [n x d]");
  return PointCloud(t.extent(0), t.extent(1), t.data());
}

Tensor PointCloud::to_tensor() const { return Tensor({n, d}, points); }

namespace {

double distance_power(std::span<const double> a, std::span<const double> b, double p) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  if (p == 2.0) return s;
  if (p == 1.0) return std::sqrt(s);
  return std::pow(std::sqrt(s), p);
}

void check_cost(const Tensor& cost) {
  if (cost.rank() != 2) throw DimensionError("cost must be a matrix");
}

// out_i = -eps log sum_j w exp((pot_j - C_ij) / eps), rows of C (or columns if `by_column`).
void softmin(const Tensor& cost, std::span<const double> pot, double w, double eps, bool by_column,
             std::span<double> out) {
  const std::size_t n = cost.extent(0), m = cost.extent(1);
  const double* c = cost.data().data();
  const std::size_t outer = by_column ? m : n, inner = by_column ? n : m;
  const double log_w = std::log(w);
  for (std::size_t i = 0; i < outer; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < inner; ++j) {
      const double cij = by_column ? c[j * m + i] : c[i * m + j];
      mx = std::max(mx, (pot[j] - cij) / eps);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < inner; ++j) {
      const double cij = by_column ? c[j * m + i] : c[i * m + j];
      s += std::exp((pot[j] - cij) / eps - mx);
    }
    out[i] = -eps * (mx + std::log(s) + log_w);
  }
}

double max_entry(const Tensor& cost) {
  double mx = 0.0;
  for (double v : cost.values()) mx = std::max(mx, v);
  return mx;
}

double max_change(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void check_finite(std::span<const double> v, int iter) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError("sinkhorn: non-finite potential at iteration " + std::to_string(iter));
}

double epsilon_at(const SinkhornOptions& o, double start, int k) {
  if (o.anneal <= 0.0) return o.epsilon;
  return std::max(o.epsilon, start * std::pow(o.anneal, k));
}

void check_options(const SinkhornOptions& o) {
  if (!(o.epsilon > 0.0)) throw InvalidArgument("sinkhorn: epsilon must be positive");
  if (o.max_iter < 1) throw InvalidArgument("sinkhorn: max_iter must be >= 1");
  if (o.anneal < 0.0 || o.anneal >= 1.0) throw InvalidArgument("sinkhorn: anneal factor must lie in [0, 1)");
}

}  // namespace

Tensor pairwise_cost(const PointCloud& x, const PointCloud& y, double p) {
  if (x.d != y.d) throw DimensionError("pairwise_cost: clouds have different dimensions");
  if (!(p >= 1.0)) throw InvalidArgument("pairwise_cost: p must be >= 1");
  std::vector<double> c(x.n * y.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < y.n; ++j) c[i * y.n + j] = distance_power(x.point(i), y.point(j), p);
  return Tensor({x.n, y.n}, std::move(c));
}

double mean_cost(const Tensor& cost) {
  double s = 0.0;
  for (double v : cost.values()) s += v;
  return s / static_cast<double>(cost.size());
}

SinkhornResult sinkhorn(const Tensor& cost, const SinkhornOptions& o) {
  check_cost(cost);
  check_options(o);
  const std::size_t n = cost.extent(0), m = cost.extent(1);
  const double a = 1.0 / n, b = 1.0 / m;
  const double start = max_entry(cost);
  SinkhornResult r;
  r.f.assign(n, 0.0);
  r.g.assign(m, 0.0);
  std::vector<double> f(n), g(m);
  for (int k = 0; k < o.max_iter; ++k) {
    const double eps = epsilon_at(o, start, k);
    softmin(cost, r.g, b, eps, false, f);
    softmin(cost, r.f, a, eps, true, g);
    for (std::size_t i = 0; i < n; ++i) f[i] = 0.5 * (r.f[i] + f[i]);
    for (std::size_t j = 0; j < m; ++j) g[j] = 0.5 * (r.g[j] + g[j]);
    check_finite(f, k + 1);
    check_finite(g, k + 1);
    const double change = std::max(max_change(f, r.f), max_change(g, r.g));
    r.f.swap(f);
    r.g.swap(g);
    r.iterations = k + 1;
    if (eps == o.epsilon && change < o.tol) {
      r.converged = true;
      break;
    }
  }
  r.cost = a * std::accumulate(r.f.begin(), r.f.end(), 0.0) + b * std::accumulate(r.g.begin(), r.g.end(), 0.0);
  return r;
}

SinkhornResult sinkhorn_symmetric(const Tensor& cost, const SinkhornOptions& o) {
  check_cost(cost);
  check_options(o);
  const std::size_t n = cost.extent(0);
  if (cost.extent(1) != n) throw DimensionError("sinkhorn_symmetric: cost must be square");
  const double a = 1.0 / n;
  const double start = max_entry(cost);
  SinkhornResult r;
  r.f.assign(n, 0.0);
  std::vector<double> t(n), next(n);
  for (int k = 0; k < o.max_iter; ++k) {
    const double eps = epsilon_at(o, start, k);
    softmin(cost, r.f, a, eps, false, t);
    for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * (r.f[i] + t[i]);
    check_finite(next, k + 1);
    const double change = max_change(next, r.f);
    r.f.swap(next);
    r.iterations = k + 1;
    if (eps == o.epsilon && change < o.tol) {
      r.converged = true;
      break;
    }
  }
  r.g = r.f;
  r.cost = 2.0 * a * std::accumulate(r.f.begin(), r.f.end(), 0.0);
  return r;
}

double marginal_violation(const Tensor& cost, const SinkhornResult& r, double eps) {
  const std::size_t n = cost.extent(0), m = cost.extent(1);
  const double a = 1.0 / n, b = 1.0 / m;
  std::vector<double> row(n, 0.0), col(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double pij = a * b * std::exp((r.f[i] + r.g[j] - cost.at(i, j)) / eps);
      row[i] += pij;
      col[j] += pij;
    }
  double v = 0.0;
  for (double x : row) v = std::max(v, std::abs(x - a));
  for (double x : col) v = std::max(v, std::abs(x - b));
  return v;
}

double sinkhorn_divergence(const PointCloud& x, const PointCloud& y, double p, const SinkhornOptions& o) {
  const double wxy = sinkhorn(pairwise_cost(x, y, p), o).cost;
  const double wxx = sinkhorn_symmetric(pairwise_cost(x, x, p), o).cost;
  const double wyy = sinkhorn_symmetric(pairwise_cost(y, y, p), o).cost;
  return wxy - 0.5 * wxx - 0.5 * wyy;
}

double wasserstein_p(const PointCloud& x, const PointCloud& y, double p, const SinkhornOptions& o) {
  return std::pow(std::max(sinkhorn_divergence(x, y, p, o), 0.0), 1.0 / p);
}

ExactOtResult exact_ot(const Tensor& cost) {
  check_cost(cost);
  const std::size_t n = cost.extent(0);
  if (cost.extent(1) != n) throw InvalidArgument("exact_ot: clouds must have equal sizes");
  if (n > kExactOtMaxPoints) throw InvalidArgument("exact_ot: supports at most 8 points");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  ExactOtResult best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost.at(i, perm[i]);
    if (s < best.cost) {
      best.cost = s;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.cost /= static_cast<double>(n);
  return best;
}

ExactOtResult exact_ot(const PointCloud& x, const PointCloud& y, double p) {
  if (x.n != y.n) throw InvalidArgument("exact_ot: clouds must have equal sizes");
  return exact_ot(pairwise_cost(x, y, p));
}

double exact_ot_cost(const PointCloud& x, const PointCloud& y, double p) { return exact_ot(x, y, p).cost; }

}  // namespace chaosot
