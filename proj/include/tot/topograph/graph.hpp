#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "tot/numkit/tape.hpp"
#include "tot/numkit/tensor.hpp"

namespace tot::topograph {

using numkit::ParamStore;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

struct ReasonerConfig {
  int steps = 3;            // N; 0 reads out the initial global node
  std::size_t hidden = 256;  // h

  void validate() const;
};

struct GraphDims {
  std::size_t node_in = 256;    // d_phi, width of the aligned nodes
  std::size_t global_in = 512;  // d_h, width of the global vector
  std::size_t out = 512;        // d_h, width of the reasoning score
  ReasonerConfig reasoner;
};

// Indices into a ParamStore for one graph. Row-vector convention throughout:
// a node is a 1 x h row and a layer computes x W + b.
struct GraphParams {
  struct Layer {
    std::size_t wq, wk;  // h x h
    std::size_t wa;      // h x h
    std::size_t ba;      // 1 x h
  };

  std::string prefix;
  GraphDims dims;
  std::size_t w_in = 0;      // d_phi x h
  std::size_t w_global = 0;  // d_h x h
  std::vector<Layer> layers;
  std::size_t readout_w = 0, readout_b = 0;  // h x d_h, 1 x d_h
  // Stand-in scorer used when topology reasoning is switched off.
  std::size_t mlp_w1 = 0, mlp_b1 = 0, mlp_w2 = 0, mlp_b2 = 0;

  // Registers "<prefix>.proj.in", "<prefix>.layer0.wq", ... with
  // Xavier-uniform weights and zero biases.
  static GraphParams create(ParamStore& store, std::string prefix, const GraphDims& dims, std::mt19937_64& rng);
};

struct AlignedGraph {
  Var nodes;                        // (1 + n) x h, global node first
  std::vector<Tensor> edge_history;  // one (1 + n) x (1 + n) matrix per step
};

// Projects aligned nodes (W_in) and the global vector (W_g) to h dims and
// stacks them with the global node at index 0. No bias.
AlignedGraph build_graph(Var aligned, Var global_vec, const ParamStore& store, const GraphParams& p);

// E = softmax_rows((X W_Q)(X W_K)^T). Directed; rows sum to 1.
Tensor edge_step(const Tensor& nodes, const Tensor& wq, const Tensor& wk);
Var edge_step(Var nodes, Var wq, Var wk);

// N synchronous steps of X <- relu(E X W_a + b_a), edges recomputed from the
// current nodes each step. Appends every E to graph.edge_history.
void reason(AlignedGraph& graph, const ParamStore& store, const GraphParams& p);

// Global node through a fully connected layer: x_0 W_r + b_r, 1 x d_h.
Var readout(const AlignedGraph& graph, const ParamStore& store, const GraphParams& p);

// Reasoning disabled: two-layer ReLU MLP over the mean of the initial nodes.
Var mlp_score(const AlignedGraph& graph, const ParamStore& store, const GraphParams& p);

// Xavier-uniform rows x cols matrix.
Tensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace tot::topograph
