#pragma once

#include <string>

#include "fedet/model.hpp"

namespace fedet {

/// Text checkpoint: shape manifest per layer followed by parameter rows
/// with 17 significant digits, so load(save(r)) is bit-exact. The write is
/// atomic (temp file + rename).
void checkpoint_save(const ModelRegistry& registry, const std::string& path);

/// Throws ParseError naming the offending model/layer/tensor on corrupt
/// input, IoError when the file cannot be read.
ModelRegistry checkpoint_load(const std::string& path);

}  // namespace fedet
