#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tot/fusionhead/head.hpp"
#include "tot/metricsdata/dataset.hpp"
#include "tot/numkit/tape.hpp"
#include "tot/otcore/kernel.hpp"
#include "tot/otcore/sinkhorn.hpp"
#include "tot/topograph/graph.hpp"

namespace tot::metricsdata {

using numkit::ParamStore;
using numkit::Tape;
using numkit::Var;

enum class Variant { Tot, Cot };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

// Module switches. Disabling a module leaves its parameters allocated (so
// checkpoints keep one layout) but cuts it out of the forward pass.
struct Ablation {
  bool ott = true;   // text graph: text content transported onto image slots
  bool oti = true;   // image graph: image content transported onto text slots
  bool dtor = true;  // topology reasoning; off = MLP over the initial nodes
  bool reg = true;   // residual global interaction (s_g)

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct ModelConfig {
  std::size_t d_h = 512;
  std::size_t n_p2 = 49;
  std::size_t n_s = 77;
  std::size_t classes = 2;
  otcore::KernelConfig kernel;      // sigma, d_phi, RFF seed
  otcore::SinkhornConfig sinkhorn;  // eps 0.1, 3 iterations
  topograph::ReasonerConfig reasoner;  // N = 3, h = 256
  std::size_t heads = 8;
  double gamma = 0.5;
  bool learn_gamma = false;
  Variant variant = Variant::Tot;
  Ablation ablation;
  std::uint64_t init_seed = 7;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&);
};

// Transport plans and aligned nodes for one sample. Depends only on the
// features and the fixed kernel, never on learned parameters.
struct Alignment {
  std::optional<Tensor> cost_vt, plan_vt, aligned_image;  // n_p2 x n_s, n_p2 x n_s, n_s x d_phi
  std::optional<Tensor> cost_tv, plan_tv, aligned_text;   // n_s x n_p2, n_s x n_p2, n_p2 x d_phi
};

struct Forward {
  fusionhead::Classified out;
  std::vector<Tensor> image_edges;  // per reasoning step, image graph
  std::vector<Tensor> text_edges;   // per reasoning step, text graph
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  // Ablation flags and gamma may change between runs on one parameter set.
  void set_ablation(const Ablation& a) { cfg_.ablation = a; }
  void set_gamma(double gamma);
  void set_sinkhorn(const otcore::SinkhornConfig& s);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Plans for the enabled graphs only; empty when neither graph is on.
  Alignment align(const FeatureBundle& b) const;
  // Same computation recorded on the tape, with the Sinkhorn iterations
  // unrolled (used for full-pipeline gradient checks).
  Forward forward(Tape& tape, const FeatureBundle& b, bool ot_on_tape = false) const;

  // Loss of one sample on a fresh tape, gradients added into `grads`. The
  // predicted class is written to `pred` when given.
  double loss_and_grad(const FeatureBundle& b, numkit::Gradients& grads, std::size_t* pred = nullptr) const;
  Tensor predict_proba(const FeatureBundle& b) const;

  // Names of the parameters owned by each module.
  bool is_graph_param(std::size_t index) const;
  bool is_reasoning_param(std::size_t index) const;  // per-step layers and readout
  bool is_attention_param(std::size_t index) const;  // REG attention and s_g MLP
  bool is_head_param(std::size_t index) const;

  const otcore::RffEmbedding& embedding() const { return rff_; }

 private:
  bool uses_graphs() const;
  void check_bundle(const FeatureBundle& b) const;

  ModelConfig cfg_;
  ParamStore params_;
  otcore::RffEmbedding rff_;
  topograph::GraphParams image_graph_, text_graph_;
  fusionhead::AttentionParams attention_;
  fusionhead::HeadParams head_;
  fusionhead::CotParams cot_;
};

std::size_t argmax(std::span<const double> v);

}  // namespace tot::metricsdata
