#pragma once

// Lipschitz estimates for networks: product-of-norms upper bound, Jacobian
// spectral-norm lower bound, and the smooth hinge regularizer built on them.

#include <cstdint>
#include <span>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/models.hpp"

namespace chaosot {

struct PowerIteration {
  double sigma = 0.0;
  std::vector<double> u;  // left singular vector
  std::vector<double> v;  // right singular vector
  int iterations = 0;
};

/// Largest singular value of W by power iteration on W^T W from a seeded start.
PowerIteration power_iteration(const Tensor& w, int iters, std::uint64_t seed = 0, double tol = 0.0);
double spectral_norm(const Tensor& w, int iters, std::uint64_t seed = 0);
/// Differentiable variant: dsigma/dW = u v^T at the converged vectors.
ad::Var spectral_norm(ad::Var w, int iters, std::uint64_t seed = 0);

/// Operator norm of a multichannel circular convolution on signals of length m.
double conv_operator_norm(const Tensor& kernel, std::size_t m, int iters, std::uint64_t seed = 0);

/// Lipschitz factor used for an activation (gelu: 1.13, others 1).
double activation_lipschitz(ad::Activation act);

/// prod_l |W_l|_2 times hidden activation factors (plus 1 for a residual path).
double lipschitz_upper(const Model& model, int iters = 100);
/// Same bound on the tape (dense models only).
ad::Var lipschitz_upper(const Model& model, std::span<const ad::Var> params, int iters = 100);

/// |Df(x)|_2 by power iteration alternating forward tangents and reverse passes.
PowerIteration jacobian_power_iteration(const Model& model, std::span<const double> x, int iters = 100,
                                        double tol = 1e-12, std::uint64_t seed = 0);
double jacobian_spectral_norm(const Model& model, std::span<const double> x, int iters = 100);

enum class LowerMode { mean, max };

double lipschitz_lower(const Model& model, std::span<const std::vector<double>> batch, LowerMode mode,
                       int iters = 100);

/// Mean over the batch of u^T (f(x + h v) - f(x - h v)) / (2h) with (u, v)
/// the top singular pair at x: equals the mean Jacobian norm to O(h^2) and is
/// differentiable in the parameters.
ad::Var lipschitz_lower_on_tape(const Model& model, std::span<const ad::Var> params,
                                std::span<const std::vector<double>> batch, int iters = 100, double h = 1e-4);

struct HingeReg {
  double l_min = 0.0;
  double l_max = 1.0;
  double beta = 50.0;
};

/// S_beta(x) = log(1 + exp(beta x)) / beta.
double smooth_hinge(double x, double beta);

/// S_beta(upper - L_max) + S_beta(L_min - lower_mean), on the tape.
ad::Var hinge_lip_reg(const Model& model, std::span<const ad::Var> params,
                      std::span<const std::vector<double>> batch, const HingeReg& reg);

}  // namespace chaosot
