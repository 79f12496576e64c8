#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tot/numkit/tensor.hpp"

namespace tot::numkit {

class Tape;

// A learnable tensor owned by a ParamStore.
struct Parameter {
  std::string name;
  Tensor value;
};

// Ordered, name-indexed collection of parameters. Gradients are carried
// separately as a vector<Tensor> parallel to the store.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(std::string_view name) { return params_[index(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index(name)]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::vector<Tensor> zero_grads() const;
  std::size_t scalar_count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.params_ == b.params_; }

 private:
  std::vector<Parameter> params_;
};

bool operator==(const Parameter& a, const Parameter& b);

using Gradients = std::vector<Tensor>;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive operations during a forward pass and replays their
// adjoints in reverse. Single-threaded; use one tape per sample.
class Tape {
 public:
  // Receives the node's own output value and the incoming adjoint; pushes
  // contributions to parents through Tape::grad_buffer.
  using Backward = std::function<void(Tape&, const Tensor& out, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf not tied to a store (used by grad_check).
  Var leaf(Tensor value);
  // Leaf bound to store[index]. Repeated calls return the same node.
  Var param(const ParamStore& store, std::size_t index);
  Var param(const ParamStore& store, std::string_view name) { return param(store, store.index(name)); }

  // Adds an op node. `op` names the primitive in error messages. Throws
  // NumericError if the value is not finite.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(const char* op, Tensor value, const std::vector<Var>& parents, Backward backward);

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }

  // Zero-initialised on first touch; add into it.
  Tensor& grad_buffer(Var v);
  // Zero tensor of the right shape if nothing flowed into v.
  Tensor grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and runs every adjoint in reverse order.
  void backward(Var loss);

  // Adds the gradient of every parameter leaf into grads[param index].
  void accumulate_param_grads(Gradients& grads) const;

  // Running hash of branch decisions (ReLU masks) taken during the forward
  // pass. Two evaluations with equal signatures lie on the same smooth piece.
  // Tracking is off by default; grad_check switches it on.
  std::uint64_t branch_signature() const { return signature_; }
  bool tracks_branches() const { return track_branches_; }
  void set_track_branches(bool on) { track_branches_ = on; }
  void mix_branch(bool taken);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::optional<std::size_t> param_index;
    Backward backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> param_nodes_;  // (param index, node id)
  std::uint64_t signature_ = 1469598103934665603ULL;
  bool track_branches_ = false;
};

}  // namespace tot::numkit
