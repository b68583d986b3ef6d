#include "fedet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedet/errors.hpp"

namespace fedet {

namespace {

constexpr double kCentroidRadius = 1.0;
constexpr std::size_t kMaxPartitionAttempts = 10000;

// Seeded point on the unit hypersphere, scaled.
std::vector<Tensor> class_centroids(std::size_t n_classes, std::size_t dim,
                                    std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "centroids");
  std::vector<Tensor> centroids;
  centroids.reserve(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> direction(dim);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : direction) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (auto& v : direction) v = v / norm * kCentroidRadius;
    centroids.push_back(Tensor::vector(std::move(direction)));
  }
  return centroids;
}

std::string format_value(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::vector<ClientShard> partition_once(
    const std::vector<LabeledExample>& dataset, const PartitionSpec& spec,
    Rng& rng, int max_label) {
  std::vector<ClientShard> shards(spec.client_count);
  for (std::size_t k = 0; k < spec.client_count; ++k) {
    shards[k].client_id = static_cast<int>(k);
  }
  for (int label = 0; label <= max_label; ++label) {
    const std::vector<double> proportions =
        rng.dirichlet_symmetric(spec.alpha, spec.client_count);
    for (const LabeledExample& example : dataset) {
      if (example.label != label) continue;
      const double u = rng.next_double();
      double cumulative = 0.0;
      std::size_t chosen = spec.client_count - 1;
      for (std::size_t k = 0; k < spec.client_count; ++k) {
        cumulative += proportions[k];
        if (u < cumulative) {
          chosen = k;
          break;
        }
      }
      shards[chosen].examples.push_back(example);
    }
  }
  return shards;
}

}  // namespace

std::vector<LabeledExample> generate_synthetic(std::size_t n_classes,
                                               std::size_t dim,
                                               std::size_t n_per_class,
                                               double spread,
                                               std::uint64_t seed) {
  if (n_classes < 2) throw ArgumentError("generate_synthetic: n_classes < 2");
  if (dim < 2) throw ArgumentError("generate_synthetic: dim < 2");
  if (n_per_class < 1) throw ArgumentError("generate_synthetic: n_per_class < 1");
  if (spread <= 0.0) throw ArgumentError("generate_synthetic: spread <= 0");

  const std::vector<Tensor> centroids = class_centroids(n_classes, dim, seed);
  std::vector<LabeledExample> out;
  out.reserve(n_classes * n_per_class);
  for (std::size_t c = 0; c < n_classes; ++c) {
    Rng rng = Rng::substream(seed, "blob", c);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::vector<double> features(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        features[j] = centroids[c].data[j] + rng.normal(0.0, spread);
      }
      out.push_back({Tensor::vector(std::move(features)),
                     static_cast<int>(c)});
    }
  }
  return out;
}

std::vector<ClientShard> dirichlet_partition(
    const std::vector<LabeledExample>& dataset, const PartitionSpec& spec) {
  if (dataset.empty()) throw ArgumentError("dirichlet_partition: empty dataset");
  if (spec.client_count < 1) throw ArgumentError("dirichlet_partition: K < 1");
  if (spec.alpha <= 0.0) throw ArgumentError("dirichlet_partition: alpha <= 0");
  if (spec.min_shard_size * spec.client_count > dataset.size()) {
    throw ArgumentError(
        "dirichlet_partition: dataset too small for requested minimum shard "
        "size");
  }
  int max_label = 0;
  for (const auto& example : dataset) {
    if (example.label < 0) {
      throw ArgumentError("dirichlet_partition: negative label");
    }
    max_label = std::max(max_label, example.label);
  }

  // Re-draw the assignment on an advancing stream until every shard
  // reaches the minimum size.
  for (std::size_t attempt = 0; attempt < kMaxPartitionAttempts; ++attempt) {
    Rng rng = Rng::substream(spec.seed, "partition", attempt);
    std::vector<ClientShard> shards =
        partition_once(dataset, spec, rng, max_label);
    bool ok = true;
    for (const auto& shard : shards) {
      if (shard.examples.size() < spec.min_shard_size) {
        ok = false;
        break;
      }
    }
    if (ok) return shards;
  }
  throw StateError(
      "dirichlet_partition: could not satisfy minimum shard size");
}

PublicSet derive_public_set(const std::vector<LabeledExample>& dataset,
                            double noise_std, std::uint64_t seed) {
  if (dataset.empty()) throw ArgumentError("derive_public_set: empty dataset");
  if (noise_std < 0.0) throw ArgumentError("derive_public_set: noise_std < 0");
  Rng rng = Rng::substream(seed, "public-noise");
  PublicSet out;
  out.inputs.reserve(dataset.size());
  for (const LabeledExample& example : dataset) {
    std::vector<double> features = example.features.data;
    if (noise_std > 0.0) {
      for (auto& v : features) v += rng.normal(0.0, noise_std);
    }
    out.inputs.push_back(Tensor::vector(std::move(features)));
  }
  return out;
}

namespace {

std::ofstream open_csv(const std::string& path, std::size_t dim) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open for writing: " + path);
  file << "label";
  for (std::size_t j = 0; j < dim; ++j) file << ",f" << j;
  file << "\n";
  return file;
}

void write_row(std::ofstream& file, int label, const Tensor& features) {
  file << label;
  for (double v : features.data) file << ',' << format_value(v);
  file << "\n";
}

}  // namespace

void save_csv(std::span<const LabeledExample> examples,
              const std::string& path) {
  const std::size_t dim = examples.empty() ? 0 : examples[0].features.numel();
  std::ofstream file = open_csv(path, dim);
  for (const LabeledExample& example : examples) {
    write_row(file, example.label, example.features);
  }
  if (!file) throw IoError("write failed: " + path);
}

void save_csv(const PublicSet& public_set, const std::string& path) {
  const std::size_t dim =
      public_set.inputs.empty() ? 0 : public_set.inputs[0].numel();
  std::ofstream file = open_csv(path, dim);
  for (const Tensor& input : public_set.inputs) {
    write_row(file, -1, input);
  }
  if (!file) throw IoError("write failed: " + path);
}

std::vector<LabeledExample> load_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(file, line)) {
    throw ParseError(path + " line 1: missing header");
  }
  std::vector<LabeledExample> out;
  std::size_t expected_fields = 0;
  {
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) ++expected_fields;
    if (expected_fields == 0) {
      throw ParseError(path + " line 1: empty header");
    }
  }
  std::size_t line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != expected_fields) {
      throw ParseError(path + " line " + std::to_string(line_number) +
                       ": expected " + std::to_string(expected_fields) +
                       " fields, got " + std::to_string(fields.size()));
    }
    LabeledExample example;
    std::vector<double> features(fields.size() - 1);
    try {
      std::size_t consumed = 0;
      example.label = std::stoi(fields[0], &consumed);
      if (consumed != fields[0].size()) throw std::invalid_argument("label");
      for (std::size_t j = 1; j < fields.size(); ++j) {
        features[j - 1] = std::stod(fields[j], &consumed);
        if (consumed != fields[j].size()) throw std::invalid_argument("value");
      }
    } catch (const std::exception&) {
      throw ParseError(path + " line " + std::to_string(line_number) +
                       ": malformed numeric field");
    }
    example.features = Tensor::vector(std::move(features));
    out.push_back(std::move(example));
  }
  return out;
}

PublicSet load_public_csv(const std::string& path) {
  PublicSet out;
  for (auto& example : load_csv(path)) {
    out.inputs.push_back(std::move(example.features));
  }
  return out;
}

MinibatchIterator::MinibatchIterator(const ClientShard& shard,
                                     std::size_t batch_size, Rng rng)
    : shard_(&shard), batch_size_(batch_size), rng_(rng) {
  if (batch_size_ < 1) throw ArgumentError("minibatch: batch size < 1");
  if (shard.examples.empty()) throw StateError("minibatch: empty shard");
}

std::vector<std::size_t> MinibatchIterator::next() {
  const std::size_t n = shard_->examples.size();
  if (batch_size_ <= n) {
    return rng_.sample_without_replacement(n, batch_size_);
  }
  std::vector<std::size_t> batch(batch_size_);
  for (auto& index : batch) index = rng_.uniform_index(n);
  return batch;
}

}  // namespace fedet
