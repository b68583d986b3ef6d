#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedet/tensor.hpp"

namespace fedet {

enum class Activation { kRelu, kIdentity };

/// Fully connected layer: y = act(W x + b), weights [out x in], bias [out].
struct DenseLayer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::kRelu;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

struct LayerGrad {
  Tensor weights;
  Tensor bias;
};

/// Loss value plus per-parameter gradients mirroring the layer stack.
struct LossGrad {
  double value = 0.0;
  std::vector<LayerGrad> grads;
};

/// Composite loss: cross_entropy(label) + lambda * KL(kl_target, output).
/// Either term may be absent; at least one must be present. The KL target
/// is treated as a constant (gradients flow only through the model output).
struct LossSpec {
  std::optional<std::size_t> label;
  double lambda = 0.0;
  std::optional<Tensor> kl_target;

  static LossSpec cross_entropy_of(std::size_t label);
  static LossSpec kl_of(Tensor target, double lambda = 1.0);
  static LossSpec composite(std::size_t label, double lambda, Tensor target);
};

/// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

/// Forward pass through the layer stack with a final softmax; returns a
/// probability simplex over the last layer's output dimension.
Tensor forward(std::span<const DenseLayer> layers, const Tensor& input);

/// -log(p_label) with p clamped below at 1e-12; never negative.
double cross_entropy(const Tensor& probabilities, std::size_t label);

/// sum_i p_i * log(p_i / q_i) with q clamped below at 1e-12 and
/// 0 * log(0/q) = 0. Both arguments must have equal length.
double kl_divergence(const Tensor& p, const Tensor& q);

/// Exact analytic gradients of the composite loss at the given input.
LossGrad backward(std::span<const DenseLayer> layers, const Tensor& input,
                  const LossSpec& spec);

/// In-place p <- p - eta * g for every parameter.
void sgd_step(std::span<DenseLayer> layers, const LossGrad& grads, double eta);

LossGrad zero_grads_like(std::span<const DenseLayer> layers);
void add_grads(LossGrad& accumulator, const LossGrad& grads);

/// Max over all parameters of the relative disagreement between backward()
/// and central finite differences (h = 1e-5):
///   |analytic - fd| / max(|analytic|, |fd|, 1e-8)
double grad_check(std::span<const DenseLayer> layers, const Tensor& input,
                  const LossSpec& spec);

}  // namespace fedet
