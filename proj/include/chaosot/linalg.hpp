#pragma once

// Small dense linear algebra on row-major matrices.

#include <cstddef>
#include <span>
#include <vector>

#include "chaosot/tensor.hpp"

namespace chaosot {

struct SymmetricEigen {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // n x n row-major; column k is the k-th eigenvector
  std::size_t n = 0;
  int sweeps = 0;

  std::vector<double> vector(std::size_t k) const;
};

/// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix.
SymmetricEigen jacobi_eigen(std::span<const double> a, std::size_t n, double tol = 1e-12, int max_sweeps = 100);

/// All singular values of W (descending), from the eigenvalues of W^T W.
std::vector<double> singular_values(const Tensor& w);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
std::vector<double> matvec(const Tensor& a, std::span<const double> x);
std::vector<double> matvec_transposed(const Tensor& a, std::span<const double> y);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace chaosot
