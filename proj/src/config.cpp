#include "fedet/config.hpp"

#include <fstream>
#include <set>

#include "fedet/errors.hpp"

namespace fedet {

namespace {

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

std::size_t parse_size(const std::string& value, const std::string& context) {
  try {
    std::size_t consumed = 0;
    const long long parsed = std::stoll(value, &consumed);
    if (consumed != value.size() || parsed < 0) throw std::invalid_argument("");
    return static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw ConfigError(context + ": expected a nonnegative integer, got '" +
                      value + "'");
  }
}

double parse_double(const std::string& value, const std::string& context) {
  try {
    std::size_t consumed = 0;
    const double parsed = std::stod(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument("");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(context + ": expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& context) {
  try {
    std::size_t consumed = 0;
    const unsigned long long parsed = std::stoull(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument("");
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError(context + ": expected an unsigned integer, got '" +
                      value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& context) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(context + ": expected true/false, got '" + value + "'");
}

}  // namespace

std::vector<std::size_t> parse_width_list(const std::string& text,
                                          const std::string& context) {
  std::vector<std::size_t> widths;
  std::string token;
  auto flush = [&]() {
    const std::string trimmed = trim(token);
    token.clear();
    if (trimmed.empty()) throw ConfigError(context + ": empty width entry");
    widths.push_back(parse_size(trimmed, context));
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  return widths;
}

std::vector<BackboneSpec> RunConfig::small_specs() const {
  std::vector<BackboneSpec> specs;
  std::string token;
  auto flush = [&]() {
    const std::string trimmed = trim(token);
    token.clear();
    if (trimmed.empty()) {
      throw ConfigError("small_widths: empty architecture entry");
    }
    specs.push_back({parse_width_list(trimmed, "small_widths"), d, u});
  };
  for (char c : small_widths) {
    if (c == '|') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  return specs;
}

BackboneSpec RunConfig::server_spec() const {
  return {parse_width_list(server_widths, "server_widths"), d, u};
}

bool RunConfig::has_dataset_paths() const {
  return !train_path.empty() && !public_path.empty() && !test_path.empty();
}

void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value, const std::string& context) {
  if (key == "K") config.K = parse_size(value, context);
  else if (key == "m") config.m = parse_size(value, context);
  else if (key == "U") config.U = parse_size(value, context);
  else if (key == "N") config.N = parse_size(value, context);
  else if (key == "d") config.d = parse_size(value, context);
  else if (key == "u") config.u = parse_size(value, context);
  else if (key == "T") config.T = parse_size(value, context);
  else if (key == "alpha") config.alpha = parse_double(value, context);
  else if (key == "tau") config.tau = parse_size(value, context);
  else if (key == "b") config.b = parse_size(value, context);
  else if (key == "eta") config.eta = parse_double(value, context);
  else if (key == "tau_s") config.tau_s = parse_size(value, context);
  else if (key == "b_s") config.b_s = parse_size(value, context);
  else if (key == "eta_s") config.eta_s = parse_double(value, context);
  else if (key == "lambda") config.lambda = parse_double(value, context);
  else if (key == "seed") config.seed = parse_u64(value, context);
  else if (key == "algorithm") config.algorithm = value;
  else if (key == "small_widths") config.small_widths = value;
  else if (key == "server_widths") config.server_widths = value;
  else if (key == "train_per_class") config.train_per_class = parse_size(value, context);
  else if (key == "public_per_class") config.public_per_class = parse_size(value, context);
  else if (key == "test_per_class") config.test_per_class = parse_size(value, context);
  else if (key == "spread") config.spread = parse_double(value, context);
  else if (key == "noise_std") config.noise_std = parse_double(value, context);
  else if (key == "train_path") config.train_path = value;
  else if (key == "public_path") config.public_path = value;
  else if (key == "test_path") config.test_path = value;
  else if (key == "metrics_path") config.metrics_path = value;
  else if (key == "checkpoint_path") config.checkpoint_path = value;
  else if (key == "raw_diversity_target") config.raw_diversity_target = parse_bool(value, context);
  else if (key == "workers") config.workers = parse_size(value, context);
  else throw ConfigError(context + ": unknown key '" + key + "'");
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config: " + path);
  RunConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    const std::string context = path + " line " + std::to_string(line_number);
    if (eq == std::string::npos) {
      throw ConfigError(context + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError(context + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(context + ": duplicate key '" + key + "'");
    }
    apply_config_entry(config, key, value, context);
  }
  return config;
}

void validate(const RunConfig& config) {
  if (config.K < 1) throw ConfigError("K must be >= 1");
  if (config.m < 1 || config.m > config.K) {
    throw ConfigError("m must be in [1, K]");
  }
  if (config.U < 1) throw ConfigError("U must be >= 1");
  if (config.N < 2) throw ConfigError("N must be >= 2");
  if (config.d < 2) throw ConfigError("d must be >= 2");
  if (config.u < 1) throw ConfigError("u must be >= 1");
  if (config.tau < 1) throw ConfigError("tau must be >= 1");
  if (config.b < 1) throw ConfigError("b must be >= 1");
  if (config.tau_s < 1) throw ConfigError("tau_s must be >= 1");
  if (config.b_s < 1) throw ConfigError("b_s must be >= 1");
  if (config.alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (config.eta < 0.0) throw ConfigError("eta must be >= 0");
  if (config.eta_s < 0.0) throw ConfigError("eta_s must be >= 0");
  if (config.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  if (config.algorithm != "fed-et" && config.algorithm != "fedavg") {
    throw ConfigError("algorithm must be 'fed-et' or 'fedavg'");
  }
  if (config.metrics_path.empty()) throw ConfigError("metrics_path is empty");
  if (config.checkpoint_path.empty()) {
    throw ConfigError("checkpoint_path is empty");
  }
  const auto specs = config.small_specs();
  if (specs.size() != config.U) {
    throw ConfigError("small_widths lists " + std::to_string(specs.size()) +
                      " architectures but U = " + std::to_string(config.U));
  }
  config.server_spec();  // validates server_widths
  if (!config.has_dataset_paths()) {
    if (config.train_per_class < 1 || config.public_per_class < 1 ||
        config.test_per_class < 1) {
      throw ConfigError(
          "per-class counts must be >= 1 when dataset paths are not set");
    }
    if (config.spread <= 0.0) throw ConfigError("spread must be > 0");
    if (config.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  }
}

}  // namespace fedet
