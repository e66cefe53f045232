#pragma once

#include <string>

#include "topseg/segmenter.hpp"

namespace topseg {

// JSON text for a model config; used in checkpoint headers and report echoes.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace topseg
