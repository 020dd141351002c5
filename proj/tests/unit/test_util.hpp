#pragma once

#include <filesystem>
#include <string>

#include "golfsig/nn/ndarray.hpp"
#include "golfsig/util/random.hpp"

namespace golfsig::testing {

inline nn::NDArray random_array(nn::Shape shape, Rng& rng, double scale = 1.0) {
  nn::NDArray a(std::move(shape));
  for (auto& v : a.values()) v = rng.uniform(-scale, scale);
  return a;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("golfsig_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace golfsig::testing
