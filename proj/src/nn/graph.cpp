#include "golfsig/nn/graph.hpp"

#include "golfsig/util/error.hpp"

namespace golfsig::nn {

const NDArray& Var::value() const { return graph_->value(*this); }

Var Graph::constant(NDArray value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(NDArray value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

bool Graph::is_frozen(const std::string& name) const {
  for (const auto& p : frozen_prefixes_) {
    if (name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

Var Graph::param(const ParameterStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  const auto& e = store.entry(name);
  const bool tracked = e.trainable && !is_frozen(name);
  nodes_.push_back(Node{e.value, {}, tracked, {}});
  params_[name] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(NDArray value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Graph::record(NDArray value, const std::vector<Var>& parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

NDArray& Graph::grad(const Var& v) {
  auto& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = NDArray(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(const Var& loss) {
  if (value(loss).size() != 1) throw DimensionError("backward: loss must be a scalar");
  grad(loss).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

Gradients Graph::parameter_gradients() const {
  Gradients out;
  for (const auto& [name, id] : params_) {
    const auto& n = nodes_[id];
    if (!n.requires_grad) continue;
    out[name] = n.grad.empty() ? NDArray(n.value.shape(), 0.0) : n.grad;
  }
  return out;
}

}  // namespace golfsig::nn
