#pragma once

#include <filesystem>

#include "golfsig/nn/params.hpp"
#include "golfsig/util/json_binding.hpp"

namespace golfsig::nn {

/// A checkpoint directory: model.json ({"kind", "config"}) next to the
/// parameter container.
void save_model(const std::filesystem::path& dir, const std::string& kind, const Json& config,
                const ParameterStore& params, bool single_precision = false);

struct LoadedModel {
  Json config;
  ParameterStore params;
};

/// Throws FormatError when the directory holds a different kind of model.
LoadedModel load_model(const std::filesystem::path& dir, const std::string& kind);

}  // namespace golfsig::nn
