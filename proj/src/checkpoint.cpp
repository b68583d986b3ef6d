#include "fedet/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedet/errors.hpp"

namespace fedet {

namespace {

constexpr char kMagic[] = "fedet-checkpoint 1";

void write_tensor(std::ofstream& out, const char* name, const Tensor& tensor) {
  out << name;
  char buffer[40];
  for (double v : tensor.data) {
    std::snprintf(buffer, sizeof(buffer), " %.17g", v);
    out << buffer;
  }
  out << "\n";
}

void write_model(std::ofstream& out, const std::string& name,
                 const Model& model) {
  out << "model " << name << "\n";
  out << "layers " << model.layers.size() << "\n";
  for (const DenseLayer& layer : model.layers) {
    out << "layer " << layer.out_dim() << ' ' << layer.in_dim() << ' '
        << (layer.activation == Activation::kRelu ? "relu" : "identity")
        << "\n";
    write_tensor(out, "weights", layer.weights);
    write_tensor(out, "bias", layer.bias);
  }
}

class Reader {
 public:
  Reader(std::ifstream& file, std::string path)
      : file_(file), path_(std::move(path)) {}

  std::string line(const std::string& what) {
    std::string text;
    if (!std::getline(file_, text)) {
      throw ParseError(path_ + ": truncated while reading " + what);
    }
    return text;
  }

  Tensor tensor(const std::string& keyword, std::vector<std::size_t> shape,
                const std::string& what) {
    std::istringstream row(line(what));
    std::string head;
    row >> head;
    if (head != keyword) {
      throw ParseError(path_ + ": expected '" + keyword + "' for " + what);
    }
    const std::size_t count = shape_numel(shape);
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!(row >> values[i])) {
        throw ParseError(path_ + ": bad or missing value " +
                         std::to_string(i) + " in " + what);
      }
    }
    double extra = 0.0;
    if (row >> extra) {
      throw ParseError(path_ + ": trailing values in " + what);
    }
    Tensor out(std::move(shape), std::move(values));
    if (!out.all_finite()) {
      throw ParseError(path_ + ": non-finite value in " + what);
    }
    return out;
  }

  Model model(const std::string& expected_name) {
    {
      std::istringstream header(line("model header"));
      std::string keyword, name;
      header >> keyword >> name;
      if (keyword != "model" || name != expected_name) {
        throw ParseError(path_ + ": expected 'model " + expected_name + "'");
      }
    }
    std::size_t layer_count = 0;
    {
      std::istringstream header(line("layer count"));
      std::string keyword;
      header >> keyword >> layer_count;
      if (keyword != "layers" || layer_count < 3) {
        throw ParseError(path_ + ": bad layer count for model " +
                         expected_name);
      }
    }
    Model model;
    for (std::size_t l = 0; l < layer_count; ++l) {
      const std::string what =
          "model " + expected_name + " layer " + std::to_string(l);
      std::istringstream header(line(what));
      std::string keyword, activation;
      std::size_t out_dim = 0, in_dim = 0;
      header >> keyword >> out_dim >> in_dim >> activation;
      if (keyword != "layer" || out_dim == 0 || in_dim == 0 ||
          (activation != "relu" && activation != "identity")) {
        throw ParseError(path_ + ": bad layer header in " + what);
      }
      DenseLayer layer;
      layer.activation = activation == "relu" ? Activation::kRelu
                                              : Activation::kIdentity;
      layer.weights = tensor("weights", {out_dim, in_dim}, what + " weights");
      layer.bias = tensor("bias", {out_dim}, what + " bias");
      model.layers.push_back(std::move(layer));
    }
    return model;
  }

 private:
  std::ifstream& file_;
  std::string path_;
};

}  // namespace

void checkpoint_save(const ModelRegistry& registry, const std::string& path) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + temp);
    out << kMagic << "\n";
    out << "classes " << registry.server_model.n_classes() << "\n";
    out << "assignment " << registry.assignment.size() << "\n";
    for (const auto& [client_id, model_id] : registry.assignment) {
      out << client_id << ' ' << model_id << "\n";
    }
    out << "small-models " << registry.small_models.size() << "\n";
    for (const auto& [model_id, model] : registry.small_models) {
      write_model(out, std::to_string(model_id), model);
    }
    write_model(out, "server", registry.server_model);
    if (!out) throw IoError("write failed: " + temp);
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) throw IoError("rename failed: " + temp + " -> " + path);
}

ModelRegistry checkpoint_load(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open for reading: " + path);
  Reader reader(file, path);
  if (reader.line("magic") != kMagic) {
    throw ParseError(path + ": not a fedet checkpoint");
  }
  std::size_t n_classes = 0;
  {
    std::istringstream header(reader.line("classes"));
    std::string keyword;
    header >> keyword >> n_classes;
    if (keyword != "classes" || n_classes < 2) {
      throw ParseError(path + ": bad classes header");
    }
  }
  ModelRegistry registry;
  std::size_t assignment_count = 0;
  {
    std::istringstream header(reader.line("assignment"));
    std::string keyword;
    header >> keyword >> assignment_count;
    if (keyword != "assignment") {
      throw ParseError(path + ": bad assignment header");
    }
  }
  for (std::size_t i = 0; i < assignment_count; ++i) {
    std::istringstream row(reader.line("assignment entry"));
    int client_id = 0, model_id = 0;
    if (!(row >> client_id >> model_id) || model_id < 1) {
      throw ParseError(path + ": bad assignment entry " + std::to_string(i));
    }
    registry.assignment[client_id] = model_id;
  }
  std::size_t small_count = 0;
  {
    std::istringstream header(reader.line("small-models"));
    std::string keyword;
    header >> keyword >> small_count;
    if (keyword != "small-models") {
      throw ParseError(path + ": bad small-models header");
    }
  }
  for (std::size_t i = 1; i <= small_count; ++i) {
    registry.small_models.emplace(static_cast<int>(i),
                                  reader.model(std::to_string(i)));
  }
  registry.server_model = reader.model("server");
  for (const auto& [client_id, model_id] : registry.assignment) {
    if (!registry.small_models.contains(model_id)) {
      throw ParseError(path + ": assignment references missing model " +
                       std::to_string(model_id));
    }
  }
  return registry;
}

}  // namespace fedet
