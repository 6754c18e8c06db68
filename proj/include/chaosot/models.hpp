#pragma once

// Emulator, summary and critic networks on top of the autodiff tape.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chaosot/autodiff.hpp"
#include "chaosot/dynamics.hpp"
#include "chaosot/tensor.hpp"

namespace chaosot {

enum class ModelKind : std::uint8_t { mlp = 0, conv = 1, linear = 2 };

std::string to_string(ModelKind kind);
std::string to_string(ad::Activation act);
ad::Activation parse_activation(const std::string& name);

/// Architecture descriptor.
///  mlp:    widths = (input, hidden..., output); out_rows > 0 reshapes the
///          output of each sample to out_rows x (output / out_rows).
///  conv:   widths = channels per layer, first and last equal 1; radius >= 1.
///  linear: widths = (in, out); a single affine map (out_rows as for mlp).
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::size_t> widths;
  ad::Activation activation = ad::Activation::relu;
  bool residual = false;
  std::size_t radius = 0;
  std::size_t out_rows = 0;
  SystemKind system = SystemKind::generic;
  std::size_t state_dim = 0;  // spatial size for conv models

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_count() const noexcept { return widths.size() - 1; }
  void validate() const;
};

ModelSpec mlp_spec(std::vector<std::size_t> widths, ad::Activation act, bool residual = false,
                   std::size_t out_rows = 0);
ModelSpec conv_spec(std::size_t state_dim, std::vector<std::size_t> channels, std::size_t radius,
                    ad::Activation act, bool residual = true);
ModelSpec linear_spec(std::size_t dim, bool residual = false);
ModelSpec linear_spec(std::size_t in, std::size_t out, std::size_t out_rows);

/// Parameters in layer order: (weight, bias) per layer.
///  mlp/linear: W [out x in], b [out]; conv: K [Cout x Cin x (2r+1)], b [Cout].
struct Model {
  ModelSpec spec;
  std::vector<Tensor> params;

  std::size_t parameter_count() const;
  const Tensor& weight(std::size_t layer) const { return params.at(2 * layer); }
  const Tensor& bias(std::size_t layer) const { return params.at(2 * layer + 1); }
  void validate() const;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every entry.
Model init_model(const ModelSpec& spec, std::uint64_t seed);
/// Sets the last layer to zero (makes a residual model the identity).
void zero_last_layer(Model& model);

/// Puts parameters on the tape, as leaves when trainable.
std::vector<ad::Var> bind(ad::Tape& tape, const Model& model, bool trainable);

/// Network output for a batch [B x in] (or a single [in]) -> [B x out].
ad::Var forward(const Model& model, std::span<const ad::Var> params, ad::Var x);

/// One-step prediction; same shape as x.
ad::Var emulator_forward(const Model& model, std::span<const ad::Var> params, ad::Var x);
/// Summary points of a batch of states [B x m] -> [(B * rows) x d].
ad::Var summary_forward(const Model& model, std::span<const ad::Var> params, ad::Var states);
/// Critic values of summary points [N x d] -> [N].
ad::Var critic_forward(const Model& model, std::span<const ad::Var> params, ad::Var points);

/// Plain (tape-free) evaluation of one sample.
std::vector<double> evaluate(const Model& model, std::span<const double> x);
/// Forward-mode tangent: returns (f(x), Df(x) v).
std::pair<std::vector<double>, std::vector<double>> jvp(const Model& model, std::span<const double> x,
                                                         std::span<const double> v);
/// Df(x)^T w via a reverse pass.
std::vector<double> vjp(const Model& model, std::span<const double> x, std::span<const double> w);
/// Explicit Jacobian [out x in] assembled column by column with jvp.
Tensor jacobian(const Model& model, std::span<const double> x);

/// Clamps every parameter entry to [-c, c].
void clip_weights(Model& model, double c);
double max_abs_param(const Model& model);

}  // namespace chaosot
