#include "tot/numkit/tape.hpp"

#include <algorithm>

#include "tot/errors.hpp"

namespace tot::numkit {

bool operator==(const Parameter& a, const Parameter& b) { return a.name == b.name && a.value == b.value; }

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ParamStore::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::vector<Tensor> ParamStore::zero_grads() const {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.value.shape());
  return grads;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  for (const auto& [pi, node] : param_nodes_)
    if (pi == index) return Var(this, node);
  Node n;
  n.value = store[index].value;
  n.requires_grad = true;
  n.param_index = index;
  Var v = push(std::move(n));
  param_nodes_.emplace_back(index, v.id());
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents, Backward backward) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(), [this](Var p) { return requires_grad(p); });
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  grad_buffer(loss)[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

void Tape::accumulate_param_grads(Gradients& grads) const {
  for (const auto& [pi, node] : param_nodes_) {
    const Node& n = nodes_[node];
    if (!n.has_grad) continue;
    auto dst = grads.at(pi).data();
    auto src = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void Tape::mix_branch(bool taken) {
  signature_ ^= taken ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL;
  signature_ *= 1099511628211ULL;
}

}  // namespace tot::numkit
