#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tot/numkit/tape.hpp"
#include "tot/numkit/tensor.hpp"

namespace tot::fusionhead {

using numkit::ParamStore;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

// Multi-head cross attention between the two global vectors followed by the
// two-layer MLP that produces s_g. Row-vector convention: q_i = v_g W_Qi.
struct AttentionParams {
  std::size_t d_h = 0;
  std::size_t heads = 0;
  std::vector<std::size_t> wq, wk, wv;  // per head, d_h x (d_h / heads)
  std::size_t wm = 0;                   // d_h x d_h
  std::size_t mlp_w1 = 0, mlp_b1 = 0, mlp_w2 = 0, mlp_b2 = 0;

  // Throws ConfigError unless heads divides d_h.
  static AttentionParams create(ParamStore& store, std::size_t d_h, std::size_t heads, std::mt19937_64& rng);
};

// m_r = t_g + [a_1 (t_g W_V1), ..., a_m (t_g W_Vm)] W_m with the per-head
// weight a_i = sigmoid(<v_g W_Qi, t_g W_Ki> / sqrt(d_h / m)).
Var cross_attention(Var v_g, Var t_g, const ParamStore& store, const AttentionParams& p);

// Per-head attention weights a_i, for inspection.
std::vector<double> attention_weights(const Tensor& v_g, const Tensor& t_g, const ParamStore& store,
                                      const AttentionParams& p);

// s_g = relu(m_r W_1 + b_1) W_2 + b_2.
Var global_score(Var m_r, const ParamStore& store, const AttentionParams& p);

struct HeadParams {
  std::size_t w_c = 0;  // d_h x c
  std::size_t b_c = 0;  // 1 x c
  // Present only when gamma is learned; gamma = sigmoid(logit).
  std::size_t gamma_logit = 0;
  bool learn_gamma = false;

  static HeadParams create(ParamStore& store, std::size_t d_h, std::size_t classes, double gamma_init,
                           bool learn_gamma, std::mt19937_64& rng);
};

struct Classified {
  Var logits;  // 1 x c
  Var probs;   // 1 x c
};

// softmax(((1 - gamma) s_g + gamma s_r) W_c + b_c). gamma is a 1 x 1 var so
// it can be a constant or a learned quantity.
Classified classify(Var s_g, Var s_r, Var gamma, const ParamStore& store, const HeadParams& p);
Classified classify(Var s_g, Var s_r, double gamma, const ParamStore& store, const HeadParams& p);

// The head's gamma: the learned value when enabled, otherwise `fixed`.
Var head_gamma(Tape& tape, const ParamStore& store, const HeadParams& p, double fixed);

// -log p[label]. Throws InputError when label is out of range.
Var cross_entropy(Var probs, std::size_t label);
// Same loss computed as lse(logits) - logits[label], stable when p underflows.
Var cross_entropy_logits(Var logits, std::size_t label);
double cross_entropy(std::span<const double> probs, std::size_t label);
// Mean over a batch.
double mean_loss(std::span<const double> losses);

// Baseline that concatenates the global vectors: softmax([v_g, t_g] W + b).
struct CotParams {
  std::size_t w = 0;  // 2 d_h x c
  std::size_t b = 0;  // 1 x c

  static CotParams create(ParamStore& store, std::size_t d_h, std::size_t classes, std::mt19937_64& rng);
};

Classified cot_forward(Var v_g, Var t_g, const ParamStore& store, const CotParams& p);

}  // namespace tot::fusionhead
