#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "golfsig/nn/ndarray.hpp"

namespace golfsig::nn {

/// Named parameters plus optimizer moments.
///
/// Non-trainable entries (batch-norm running statistics) live in the same map
/// so checkpoints capture them, but the optimizer never touches them.
class ParameterStore {
 public:
  struct Entry {
    NDArray value;
    bool trainable = true;
    NDArray first_moment;
    NDArray second_moment;
    std::uint64_t step = 0;
  };

  NDArray& add(const std::string& name, NDArray value, bool trainable = true);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const NDArray& get(const std::string& name) const;
  NDArray& get(const std::string& name);
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  void apply_buffers(const std::map<std::string, NDArray>& buffers);

  std::size_t parameter_count(bool trainable_only = true) const;
  /// Resets the moments and step counters of every parameter.
  void reset_optimizer();

  /// Writes `index.json` plus one GSMB blob per parameter into `dir`.
  void save(const std::filesystem::path& dir, bool single_precision = false) const;
  static ParameterStore load(const std::filesystem::path& dir);

 private:
  std::map<std::string, Entry> entries_;
};

using Gradients = std::map<std::string, NDArray>;

}  // namespace golfsig::nn
