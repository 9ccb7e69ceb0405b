#pragma once

#include <string>
#include <vector>

#include "sgm/model.hpp"
#include "sgm/sgm_module.hpp"

namespace sgm {

/// Checkpoint container: magic "SGMCKPT1", version byte, config digest, then
/// per-layer little-endian f32 arrays in declaration order. SGMs, when
/// present, follow under a tagged "SGMS" section.
struct Checkpoint {
    Model model;
    std::vector<SGModule> sgms;
};

void save_checkpoint(const std::string& path, const Model& model, const std::vector<SGModule>* sgms);

/// Rebuilds from `expected` config; throws when the stored digest disagrees.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace sgm
