#include "tot/topograph/graph.hpp"

#include <cmath>

#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"

namespace tot::topograph {

namespace nk = numkit;

void ReasonerConfig::validate() const {
  if (steps < 0) throw ConfigError("reason steps must be >= 0, got " + std::to_string(steps));
  if (hidden == 0) throw ConfigError("graph hidden size must be positive");
}

Tensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

GraphParams GraphParams::create(ParamStore& store, std::string prefix, const GraphDims& dims, std::mt19937_64& rng) {
  dims.reasoner.validate();
  const std::size_t h = dims.reasoner.hidden;
  GraphParams p;
  p.prefix = prefix;
  p.dims = dims;
  p.w_in = store.add(prefix + ".proj.in", xavier(dims.node_in, h, rng));
  p.w_global = store.add(prefix + ".proj.global", xavier(dims.global_in, h, rng));
  for (int n = 0; n < dims.reasoner.steps; ++n) {
    const std::string l = prefix + ".layer" + std::to_string(n);
    Layer layer{};
    layer.wq = store.add(l + ".wq", xavier(h, h, rng));
    layer.wk = store.add(l + ".wk", xavier(h, h, rng));
    layer.wa = store.add(l + ".wa", xavier(h, h, rng));
    layer.ba = store.add(l + ".ba", Tensor::zeros(1, h));
    p.layers.push_back(layer);
  }
  p.readout_w = store.add(prefix + ".readout.w", xavier(h, dims.out, rng));
  p.readout_b = store.add(prefix + ".readout.b", Tensor::zeros(1, dims.out));
  p.mlp_w1 = store.add(prefix + ".mlp.w1", xavier(h, h, rng));
  p.mlp_b1 = store.add(prefix + ".mlp.b1", Tensor::zeros(1, h));
  p.mlp_w2 = store.add(prefix + ".mlp.w2", xavier(h, dims.out, rng));
  p.mlp_b2 = store.add(prefix + ".mlp.b2", Tensor::zeros(1, dims.out));
  return p;
}

AlignedGraph build_graph(Var aligned, Var global_vec, const ParamStore& store, const GraphParams& p) {
  if (global_vec.rows() != 1 || global_vec.cols() != p.dims.global_in) {
    throw DimensionError(p.prefix + ": global vector " + nk::to_string(global_vec.shape()) + ", expected [1x" +
                         std::to_string(p.dims.global_in) + "]");
  }
  Tape& tape = global_vec.tape();
  Var head = nk::matmul(global_vec, tape.param(store, p.w_global));
  if (aligned.rows() == 0) return {head, {}};
  if (aligned.cols() != p.dims.node_in) {
    throw DimensionError(p.prefix + ": aligned nodes " + nk::to_string(aligned.shape()) + ", expected width " +
                         std::to_string(p.dims.node_in));
  }
  Var body = nk::matmul(aligned, tape.param(store, p.w_in));
  return {nk::concat_rows({head, body}), {}};
}

Tensor edge_step(const Tensor& nodes, const Tensor& wq, const Tensor& wk) {
  return nk::softmax_rows(nk::matmul_nt(nk::matmul(nodes, wq), nk::matmul(nodes, wk)));
}

Var edge_step(Var nodes, Var wq, Var wk) {
  return nk::softmax_rows(nk::matmul_nt(nk::matmul(nodes, wq), nk::matmul(nodes, wk)));
}

void reason(AlignedGraph& graph, const ParamStore& store, const GraphParams& p) {
  Tape& tape = graph.nodes.tape();
  for (const auto& layer : p.layers) {
    Var e = edge_step(graph.nodes, tape.param(store, layer.wq), tape.param(store, layer.wk));
    graph.edge_history.push_back(e.value());
    Var mixed = nk::matmul(nk::matmul(e, graph.nodes), tape.param(store, layer.wa));
    graph.nodes = nk::relu(nk::add_row(mixed, tape.param(store, layer.ba)));
  }
}

Var readout(const AlignedGraph& graph, const ParamStore& store, const GraphParams& p) {
  Tape& tape = graph.nodes.tape();
  Var global = nk::slice_rows(graph.nodes, 0, 1);
  return nk::add_row(nk::matmul(global, tape.param(store, p.readout_w)), tape.param(store, p.readout_b));
}

Var mlp_score(const AlignedGraph& graph, const ParamStore& store, const GraphParams& p) {
  Tape& tape = graph.nodes.tape();
  Var pooled = nk::mean_rows(graph.nodes);
  Var hidden = nk::relu(nk::add_row(nk::matmul(pooled, tape.param(store, p.mlp_w1)), tape.param(store, p.mlp_b1)));
  return nk::add_row(nk::matmul(hidden, tape.param(store, p.mlp_w2)), tape.param(store, p.mlp_b2));
}

}  // namespace tot::topograph
