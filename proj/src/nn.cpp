#include "fedet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "fedet/errors.hpp"

namespace fedet {

namespace {

constexpr double kLogClamp = 1e-12;

double activate(double z, Activation activation) {
  return activation == Activation::kRelu ? std::max(z, 0.0) : z;
}

double activate_grad(double z, Activation activation) {
  return activation == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

// z = W x + b
std::vector<double> affine(const DenseLayer& layer,
                           const std::vector<double>& input) {
  if (input.size() != layer.in_dim()) {
    throw DimensionError("layer input dimension mismatch");
  }
  const std::size_t out = layer.out_dim();
  const std::size_t in = layer.in_dim();
  std::vector<double> z(out);
  for (std::size_t r = 0; r < out; ++r) {
    double acc = layer.bias.data[r];
    const double* row = &layer.weights.data[r * in];
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * input[c];
    z[r] = acc;
  }
  return z;
}

double composite_loss_value(const Tensor& probabilities,
                            const LossSpec& spec) {
  double value = 0.0;
  if (spec.label) value += cross_entropy(probabilities, *spec.label);
  if (spec.kl_target) {
    value += spec.lambda * kl_divergence(*spec.kl_target, probabilities);
  }
  return value;
}

void check_spec(const Tensor& probabilities, const LossSpec& spec) {
  if (!spec.label && !spec.kl_target) {
    throw ArgumentError("loss spec has no active term");
  }
  if (spec.lambda < 0.0) throw ArgumentError("lambda must be >= 0");
  if (spec.kl_target && spec.kl_target->numel() != probabilities.numel()) {
    throw DimensionError("KL target length mismatch");
  }
}

}  // namespace

LossSpec LossSpec::cross_entropy_of(std::size_t label) {
  LossSpec spec;
  spec.label = label;
  return spec;
}

LossSpec LossSpec::kl_of(Tensor target, double lambda) {
  LossSpec spec;
  spec.lambda = lambda;
  spec.kl_target = std::move(target);
  return spec;
}

LossSpec LossSpec::composite(std::size_t label, double lambda, Tensor target) {
  LossSpec spec;
  spec.label = label;
  spec.lambda = lambda;
  spec.kl_target = std::move(target);
  return spec;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

Tensor forward(std::span<const DenseLayer> layers, const Tensor& input) {
  if (layers.empty()) throw ArgumentError("forward: no layers");
  std::vector<double> activation = input.data;
  for (const DenseLayer& layer : layers) {
    std::vector<double> z = affine(layer, activation);
    for (auto& v : z) v = activate(v, layer.activation);
    activation = std::move(z);
  }
  return Tensor::vector(softmax(activation));
}

double cross_entropy(const Tensor& probabilities, std::size_t label) {
  if (label >= probabilities.numel()) {
    throw ArgumentError("cross_entropy: label out of range");
  }
  const double p = std::max(probabilities.data[label], kLogClamp);
  return std::max(0.0, -std::log(p));
}

double kl_divergence(const Tensor& p, const Tensor& q) {
  if (p.numel() != q.numel()) {
    throw DimensionError("kl_divergence: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (p.data[i] <= 0.0) continue;  // 0 * log(0/q) = 0
    total += p.data[i] * std::log(p.data[i] / std::max(q.data[i], kLogClamp));
  }
  return total;
}

LossGrad backward(std::span<const DenseLayer> layers, const Tensor& input,
                  const LossSpec& spec) {
  if (layers.empty()) throw ArgumentError("backward: no layers");

  // Forward, caching pre-activations and activations per layer.
  std::vector<std::vector<double>> pre(layers.size());
  std::vector<std::vector<double>> act(layers.size() + 1);
  act[0] = input.data;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    pre[l] = affine(layers[l], act[l]);
    act[l + 1] = pre[l];
    for (auto& v : act[l + 1]) v = activate(v, layers[l].activation);
  }
  const Tensor probabilities = Tensor::vector(softmax(act.back()));
  check_spec(probabilities, spec);

  // Gradient at the softmax input. Cross-entropy on label y contributes
  // p - onehot(y); the KL term with constant target q contributes
  // lambda * (sum(q) * p - q), which reduces to lambda * (p - q) for a
  // normalized target.
  const std::size_t n = probabilities.numel();
  std::vector<double> delta(n, 0.0);
  if (spec.label) {
    if (*spec.label >= n) throw ArgumentError("backward: label out of range");
    for (std::size_t i = 0; i < n; ++i) delta[i] = probabilities.data[i];
    delta[*spec.label] -= 1.0;
  }
  if (spec.kl_target) {
    const Tensor& target = *spec.kl_target;
    double target_sum = 0.0;
    for (double v : target.data) target_sum += v;
    for (std::size_t i = 0; i < n; ++i) {
      delta[i] +=
          spec.lambda * (target_sum * probabilities.data[i] - target.data[i]);
    }
  }

  LossGrad result;
  result.value = composite_loss_value(probabilities, spec);
  result.grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    // Through the activation.
    for (std::size_t r = 0; r < out; ++r) {
      delta[r] *= activate_grad(pre[l][r], layer.activation);
    }
    LayerGrad& grad = result.grads[l];
    grad.weights = Tensor::zeros({out, in});
    grad.bias = Tensor::zeros({out});
    std::vector<double> next_delta(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      grad.bias.data[r] = delta[r];
      double* wrow = &grad.weights.data[r * in];
      const double* lrow = &layer.weights.data[r * in];
      for (std::size_t c = 0; c < in; ++c) {
        wrow[c] = delta[r] * act[l][c];
        next_delta[c] += lrow[c] * delta[r];
      }
    }
    delta = std::move(next_delta);
  }
  return result;
}

void sgd_step(std::span<DenseLayer> layers, const LossGrad& grads, double eta) {
  if (grads.grads.size() != layers.size()) {
    throw DimensionError("sgd_step: gradient/parameter layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    DenseLayer& layer = layers[l];
    const LayerGrad& grad = grads.grads[l];
    if (!grad.weights.same_shape(layer.weights) ||
        !grad.bias.same_shape(layer.bias)) {
      throw DimensionError("sgd_step: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      layer.weights.data[i] -= eta * grad.weights.data[i];
    }
    for (std::size_t i = 0; i < layer.bias.data.size(); ++i) {
      layer.bias.data[i] -= eta * grad.bias.data[i];
    }
  }
}

LossGrad zero_grads_like(std::span<const DenseLayer> layers) {
  LossGrad zero;
  zero.grads.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    zero.grads[l].weights = Tensor::zeros(layers[l].weights.shape);
    zero.grads[l].bias = Tensor::zeros(layers[l].bias.shape);
  }
  return zero;
}

void add_grads(LossGrad& accumulator, const LossGrad& grads) {
  if (accumulator.grads.size() != grads.grads.size()) {
    throw DimensionError("add_grads: layer count mismatch");
  }
  accumulator.value += grads.value;
  for (std::size_t l = 0; l < grads.grads.size(); ++l) {
    auto& acc = accumulator.grads[l];
    const auto& g = grads.grads[l];
    for (std::size_t i = 0; i < g.weights.data.size(); ++i) {
      acc.weights.data[i] += g.weights.data[i];
    }
    for (std::size_t i = 0; i < g.bias.data.size(); ++i) {
      acc.bias.data[i] += g.bias.data[i];
    }
  }
}

double grad_check(std::span<const DenseLayer> layers, const Tensor& input,
                  const LossSpec& spec) {
  constexpr double kStep = 1e-5;
  const LossGrad analytic = backward(layers, input, spec);

  std::vector<DenseLayer> work(layers.begin(), layers.end());
  auto loss_at = [&]() {
    const Tensor probabilities = forward(work, input);
    return composite_loss_value(probabilities, spec);
  };

  double worst = 0.0;
  auto probe = [&](double& parameter, double analytic_grad) {
    const double saved = parameter;
    parameter = saved + kStep;
    const double hi = loss_at();
    parameter = saved - kStep;
    const double lo = loss_at();
    parameter = saved;
    const double fd = (hi - lo) / (2.0 * kStep);
    const double scale =
        std::max({std::fabs(analytic_grad), std::fabs(fd), 1e-8});
    worst = std::max(worst, std::fabs(analytic_grad - fd) / scale);
  };

  for (std::size_t l = 0; l < work.size(); ++l) {
    for (std::size_t i = 0; i < work[l].weights.data.size(); ++i) {
      probe(work[l].weights.data[i], analytic.grads[l].weights.data[i]);
    }
    for (std::size_t i = 0; i < work[l].bias.data.size(); ++i) {
      probe(work[l].bias.data[i], analytic.grads[l].bias.data[i]);
    }
  }
  return worst;
}

}  // namespace fedet
