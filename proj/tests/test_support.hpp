#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fedet/model.hpp"
#include "fedet/rng.hpp"
#include "fedet/tensor.hpp"

namespace fedet::test {

inline Tensor random_input(Rng& rng, std::size_t dim, double scale = 1.0) {
  std::vector<double> values(dim);
  for (auto& v : values) v = rng.normal(0.0, scale);
  return Tensor::vector(std::move(values));
}

inline Tensor random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> values(n);
  double total = 0.0;
  for (auto& v : values) {
    v = std::exp(rng.normal(0.0, 1.5));
    total += v;
  }
  for (auto& v : values) v /= total;
  return Tensor::vector(std::move(values));
}

inline Model random_model(Rng& rng, std::size_t input_dim,
                          std::vector<std::size_t> hidden,
                          std::size_t feature_dim, std::size_t n_classes) {
  BackboneSpec spec{std::move(hidden), input_dim, feature_dim};
  return build_model(spec, n_classes, rng.next_u64());
}

inline bool models_identical(const Model& a, const Model& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].weights.data != b.layers[l].weights.data) return false;
    if (a.layers[l].bias.data != b.layers[l].bias.data) return false;
  }
  return true;
}

/// True when every ReLU pre-activation stays at least `margin` away from
/// zero, i.e. a finite-difference probe cannot cross a kink.
inline bool kink_free(const Model& model, const Tensor& input, double margin) {
  std::vector<double> activation = input.data;
  for (const DenseLayer& layer : model.layers) {
    std::vector<double> z(layer.out_dim());
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      double acc = layer.bias.data[r];
      for (std::size_t c = 0; c < layer.in_dim(); ++c) {
        acc += layer.weights.at(r, c) * activation[c];
      }
      z[r] = acc;
    }
    if (layer.activation == Activation::kRelu) {
      for (double v : z) {
        if (std::fabs(v) < margin) return false;
      }
      for (auto& v : z) v = std::max(v, 0.0);
    }
    activation = std::move(z);
  }
  return true;
}

inline double max_param_delta(const Model& a, const Model& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weights.data.size(); ++i) {
      worst = std::max(worst, std::fabs(a.layers[l].weights.data[i] -
                                        b.layers[l].weights.data[i]));
    }
    for (std::size_t i = 0; i < a.layers[l].bias.data.size(); ++i) {
      worst = std::max(worst, std::fabs(a.layers[l].bias.data[i] -
                                        b.layers[l].bias.data[i]));
    }
  }
  return worst;
}

/// Unique scratch directory under the system temp path; removed on
/// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace fedet::test
