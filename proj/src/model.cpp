#include "fedet/model.hpp"

#include <cmath>

#include "fedet/errors.hpp"
#include "fedet/rng.hpp"

namespace fedet {

namespace {

DenseLayer init_layer(std::size_t out, std::size_t in, Activation activation,
                      Rng& rng) {
  DenseLayer layer;
  layer.weights = Tensor::zeros({out, in});
  layer.bias = Tensor::zeros({out});
  layer.activation = activation;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& w : layer.weights.data) {
    w = (2.0 * rng.next_double() - 1.0) * bound;
  }
  return layer;
}

void check_head_shape(const Model& model, const Head& head) {
  const DenseLayer& hidden = model.layers[model.head_start()];
  const DenseLayer& output = model.layers[model.head_start() + 1];
  if (!head.hidden.weights.same_shape(hidden.weights) ||
      !head.hidden.bias.same_shape(hidden.bias) ||
      !head.output.weights.same_shape(output.weights) ||
      !head.output.bias.same_shape(output.bias)) {
    throw DimensionError("head shape mismatch");
  }
}

}  // namespace

std::size_t Model::param_count() const {
  std::size_t count = 0;
  for (const DenseLayer& layer : layers) {
    count += layer.weights.numel() + layer.bias.numel();
  }
  return count;
}

Head Model::head() const {
  Head head;
  head.hidden = layers[head_start()];
  head.output = layers[head_start() + 1];
  return head;
}

void Model::set_head(const Head& head) {
  check_head_shape(*this, head);
  layers[head_start()] = head.hidden;
  layers[head_start() + 1] = head.output;
}

Tensor Model::predict(const Tensor& input) const {
  return forward(layers, input);
}

Model build_model(const BackboneSpec& spec, std::size_t n_classes,
                  std::uint64_t seed) {
  if (spec.input_dim == 0 || spec.feature_dim == 0 || n_classes < 2) {
    throw ArgumentError("build_model: invalid spec");
  }
  for (std::size_t width : spec.hidden_widths) {
    if (width == 0) throw ArgumentError("build_model: zero hidden width");
  }
  Rng rng = Rng::substream(seed, "model-init");
  Model model;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t width : spec.hidden_widths) {
    model.layers.push_back(init_layer(width, fan_in, Activation::kRelu, rng));
    fan_in = width;
  }
  // Backbone always terminates in the feature layer feeding the head.
  model.layers.push_back(
      init_layer(spec.feature_dim, fan_in, Activation::kRelu, rng));
  // Shared-shape head: [u -> u, ReLU] then [u -> N, identity].
  model.layers.push_back(init_layer(spec.feature_dim, spec.feature_dim,
                                    Activation::kRelu, rng));
  model.layers.push_back(
      init_layer(n_classes, spec.feature_dim, Activation::kIdentity, rng));
  return model;
}

std::size_t ModelRegistry::param_count_of(int model_id) const {
  return small_models.at(model_id).param_count();
}

ModelRegistry registry_init(const std::vector<BackboneSpec>& small_specs,
                            const BackboneSpec& server_spec,
                            std::size_t n_classes, std::uint64_t seed) {
  if (small_specs.empty()) throw ArgumentError("registry_init: U < 1");
  ModelRegistry registry;
  for (std::size_t i = 0; i < small_specs.size(); ++i) {
    const int model_id = static_cast<int>(i) + 1;
    registry.small_models.emplace(
        model_id,
        build_model(small_specs[i], n_classes,
                    Rng::substream(seed, "registry-small", i).next_u64()));
  }
  registry.server_model = build_model(
      server_spec, n_classes,
      Rng::substream(seed, "registry-server").next_u64());

  const std::size_t server_params = registry.server_model.param_count();
  for (const auto& [id, model] : registry.small_models) {
    if (model.param_count() >= server_params) {
      throw ConfigError("registry_init: server model (" +
                        std::to_string(server_params) +
                        " params) must be strictly larger than small model " +
                        std::to_string(id) + " (" +
                        std::to_string(model.param_count()) + " params)");
    }
  }
  return registry;
}

std::map<int, int> assign_models(const std::vector<int>& client_ids,
                                 std::size_t model_count, std::uint64_t seed) {
  if (model_count < 1) throw ArgumentError("assign_models: U < 1");
  Rng rng = Rng::substream(seed, "assign");
  std::map<int, int> assignment;
  for (int client_id : client_ids) {
    assignment[client_id] = static_cast<int>(rng.uniform_index(model_count)) + 1;
  }
  return assignment;
}

}  // namespace fedet
