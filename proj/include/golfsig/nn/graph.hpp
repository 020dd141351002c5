#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "golfsig/nn/ndarray.hpp"
#include "golfsig/nn/params.hpp"
#include "golfsig/util/random.hpp"

namespace golfsig::nn {

class Graph;

/// Handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  const NDArray& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so replaying
/// the backward closures in reverse order visits every node after all of its
/// consumers.
class Graph {
 public:
  /// Receives the graph and the accumulated gradient of the node's output.
  using Backward = std::function<void(Graph&, const NDArray&)>;

  explicit Graph(bool training = false, std::uint64_t seed = 0) : training_(training), rng_(seed) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(NDArray value);
  /// Leaf whose gradient is tracked (for gradients with respect to inputs).
  Var leaf(NDArray value);
  /// Binds a named parameter. Binding the same name twice returns the same node.
  /// Frozen parameters are bound as constants.
  Var param(const ParameterStore& store, const std::string& name);
  Var record(NDArray value, std::initializer_list<Var> parents, Backward backward);
  Var record(NDArray value, const std::vector<Var>& parents, Backward backward);

  const NDArray& value(const Var& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  /// Gradient buffer of `v`, zero-initialised on first use.
  NDArray& grad(const Var& v);
  bool has_grad(const Var& v) const { return !nodes_[v.id()].grad.empty(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every backward closure.
  void backward(const Var& loss);

  /// Gradients of bound trainable parameters, keyed by name.
  Gradients parameter_gradients() const;

  /// Non-trainable buffer values produced by this pass (batch-norm running
  /// statistics); apply them with ParameterStore::apply_buffers.
  void stage_buffer(const std::string& name, NDArray value) { buffers_[name] = std::move(value); }
  const std::map<std::string, NDArray>& buffer_updates() const { return buffers_; }

  void freeze(std::string prefix) { frozen_prefixes_.push_back(std::move(prefix)); }
  bool training() const { return training_; }
  Rng& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    NDArray value;
    NDArray grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool is_frozen(const std::string& name) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  std::vector<std::string> frozen_prefixes_;
  std::map<std::string, NDArray> buffers_;
  bool training_;
  Rng rng_;
};

}  // namespace golfsig::nn
