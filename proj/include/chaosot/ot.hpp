#pragma once

// Entropic optimal transport between uniform empirical measures.

#include <cstddef>
#include <span>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/tensor.hpp"

namespace chaosot {

/// n points in R^d with implicit weights 1/n.
struct PointCloud {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> points;  // n x d row-major

  PointCloud() = default;
  PointCloud(std::size_t n, std::size_t d, std::vector<double> points);
  static PointCloud from_tensor(const Tensor& t);
  std::span<const double> point(std::size_t i) const { return {points.data() + i * d, d}; }
  Tensor to_tensor() const;
};

/// C_ij = |x_i - y_j|_2^p, returned as an n x m tensor.
Tensor pairwise_cost(const PointCloud& x, const PointCloud& y, double p);
double mean_cost(const Tensor& cost);

struct SinkhornOptions {
  double epsilon = 0.02;
  int max_iter = 200;
  double tol = 1e-9;
  /// When > 0, epsilon starts at max(C) and shrinks by this factor per
  /// iteration until it reaches `epsilon` (warm-started annealing).
  double anneal = 0.0;
};

struct SinkhornResult {
  double cost = 0.0;  // entropic OT value: <a, f> + <b, g>
  std::vector<double> f, g;
  int iterations = 0;
  bool converged = false;
};

/// Log-domain Sinkhorn with uniform marginals. Both potentials are updated
/// from the previous iterate and averaged with it: f <- (f + T(g)) / 2,
/// g <- (g + T(f)) / 2.
SinkhornResult sinkhorn(const Tensor& cost, const SinkhornOptions& options);
/// Symmetric iteration f <- (f + T(f)) / 2 for a square symmetric cost; g = f.
SinkhornResult sinkhorn_symmetric(const Tensor& cost, const SinkhornOptions& options);

/// Largest deviation of the implied plan's marginals from uniform.
double marginal_violation(const Tensor& cost, const SinkhornResult& r, double epsilon);

/// S = W(X,Y) - W(X,X)/2 - W(Y,Y)/2.
double sinkhorn_divergence(const PointCloud& x, const PointCloud& y, double p, const SinkhornOptions& options);

/// Debiased divergence on the tape with gradients into both point sets
/// ([n x d] and [m x d]) through the unrolled iterations. The annealing
/// schedule is held constant in the reverse pass.
ad::Var sinkhorn_divergence(ad::Var x, ad::Var y, double p, const SinkhornOptions& options);

/// (max(S, 0))^(1/p).
double wasserstein_p(const PointCloud& x, const PointCloud& y, double p, const SinkhornOptions& options);

struct ExactOtResult {
  double cost = 0.0;
  std::vector<std::size_t> assignment;  // x_i -> y_{assignment[i]}
};

constexpr std::size_t kExactOtMaxPoints = 8;

/// Minimum over permutations of (1/n) sum_i C_{i, pi(i)}; n = m <= 8.
ExactOtResult exact_ot(const PointCloud& x, const PointCloud& y, double p);
ExactOtResult exact_ot(const Tensor& cost);
double exact_ot_cost(const PointCloud& x, const PointCloud& y, double p);

}  // namespace chaosot
