#pragma once

// Define-by-run reverse-mode automatic differentiation over dense tensors.
//
// A Tape is built fresh for every loss evaluation. Leaves are either
// differentiable (`leaf`) or constants; every op records its output value and
// a closure that pushes the output cotangent back into its inputs. Nodes that
// do not depend on any differentiable leaf carry no closure and no gradient.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "chaosot/tensor.hpp"

namespace chaosot::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the output cotangent; accumulates into inputs via `grad_of`.
  using Backward = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Records an op output. `inputs` decide whether the node is differentiable.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

  /// Mutable gradient slot of a node, allocated on first use. Only valid
  /// during backward, on nodes that require a gradient.
  std::span<double> grad_of(Var v);

  /// Reverse accumulation from a scalar root (seed 1).
  void backward(Var root);
  /// Reverse accumulation with an explicit output cotangent (vector-Jacobian product).
  void backward(Var root, const Tensor& seed);

  /// Gradient of the last backward pass; zeros if the node was unreachable.
  Tensor grad(Var v) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    Backward backward;
    std::vector<double> grad;
  };
  void run_backward(std::size_t root, std::span<const double> seed);

  std::vector<Node> nodes_;
};

enum class Activation { identity, relu, gelu, tanh };

// Elementwise and reduction primitives.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var mse(Var a, Var b);
Var reshape(Var a, Shape shape);

/// y = W x + b for x of shape [n], or row-wise for a batch [B x n].
Var affine(Var x, Var weight, Var bias);

/// Single-channel circular convolution, y_i = sum_j k_{j+r} x_{(i+j) mod m}.
Var circular_conv1d(Var x, Var kernel);

/// Batched multichannel circular convolution.
/// x: [B x Cin x m], kernel: [Cout x Cin x (2r+1)], bias: [Cout] -> [B x Cout x m].
Var circular_conv1d(Var x, Var kernel, Var bias);

Var activation(Var x, Activation kind);

/// (1/beta) log(1 + exp(beta x)), evaluated without overflow.
Var softplus(Var x, double beta);

/// Cyclic shift along the last axis: out[..., i] = x[..., (i + shift) mod m].
Var roll(Var x, long shift);

/// Stacks k tensors of shape [B x m] into per-site feature rows [(B*m) x k].
Var stack_features(std::span<const Var> features);

/// Selects rows of a matrix [N x d] -> [k x d].
Var gather_rows(Var x, std::span<const std::size_t> rows);

/// Concatenates matrices with equal column counts along rows.
Var concat_rows(Var a, Var b);

/// Scalar activation helpers shared with forward-mode code.
double activate(Activation kind, double x);
double activate_derivative(Activation kind, double x);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose stencil straddles a kink
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor: errors are |a-n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  /// Check at most this many coordinates (evenly strided); 0 checks all.
  std::size_t max_coords = 0;
  /// Skip coordinates whose central difference changes by more than
  /// kink_tol * max(floor, |numeric|) when the step shrinks by 4: the
  /// stencil straddles a non-differentiable point of an activation.
  bool skip_kinks = false;
  double kink_tol = 1e-5;
};

using ScalarFn = std::function<Var(Tape&, Var)>;

/// Compares the reverse-mode gradient of f at x with central differences.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, GradCheckOptions options = {});

}  // namespace chaosot::ad
