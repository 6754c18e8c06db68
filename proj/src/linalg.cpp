#include "chaosot/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chaosot/error.hpp"

namespace chaosot {

std::vector<double> SymmetricEigen::vector(std::size_t k) const {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = vectors[i * n + k];
  return v;
}

SymmetricEigen jacobi_eigen(std::span<const double> input, std::size_t n, double tol, int max_sweeps) {
  if (input.size() != n * n) throw DimensionError("jacobi_eigen: matrix is not n x n");
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a[p * n + q]));
    if (off <= tol * std::max(scale, 1e-300)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a[i * n + i] > a[j * n + j]; });
  SymmetricEigen out;
  out.n = n;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + k] = v[i * n + order[k]];
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw DimensionError("matmul: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double x = a[i * k + l];
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += x * b[l * m + j];
    }
  return Tensor({n, m}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected a matrix");
  const std::size_t n = a.extent(0), m = a.extent(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
  return Tensor({m, n}, std::move(out));
}

std::vector<double> matvec(const Tensor& a, std::span<const double> x) {
  if (a.rank() != 2 || a.extent(1) != x.size()) throw DimensionError("matvec: shape mismatch");
  const std::size_t n = a.extent(0), m = a.extent(1);
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y[i] += a[i * m + j] * x[j];
  return y;
}

std::vector<double> matvec_transposed(const Tensor& a, std::span<const double> y) {
  if (a.rank() != 2 || a.extent(0) != y.size()) throw DimensionError("matvec_transposed: shape mismatch");
  const std::size_t n = a.extent(0), m = a.extent(1);
  std::vector<double> x(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) x[j] += a[i * m + j] * y[i];
  return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> singular_values(const Tensor& w) {
  const Tensor wtw = matmul(transpose(w), w);
  const auto eig = jacobi_eigen(wtw.values(), wtw.extent(0));
  std::vector<double> s;
  for (double ev : eig.values) s.push_back(std::sqrt(std::max(ev, 0.0)));
  return s;
}

}  // namespace chaosot
