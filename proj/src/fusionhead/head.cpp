#include "tot/fusionhead/head.hpp"

#include <cmath>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"
#include "tot/topograph/graph.hpp"

namespace tot::fusionhead {

namespace nk = numkit;
using topograph::xavier;

AttentionParams AttentionParams::create(ParamStore& store, std::size_t d_h, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || d_h % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide d_h (" + std::to_string(d_h) + ")");
  }
  AttentionParams p;
  p.d_h = d_h;
  p.heads = heads;
  const std::size_t dk = d_h / heads;
  for (std::size_t i = 0; i < heads; ++i) {
    const std::string h = "reg.head" + std::to_string(i);
    p.wq.push_back(store.add(h + ".wq", xavier(d_h, dk, rng)));
    p.wk.push_back(store.add(h + ".wk", xavier(d_h, dk, rng)));
    p.wv.push_back(store.add(h + ".wv", xavier(d_h, dk, rng)));
  }
  p.wm = store.add("reg.wm", xavier(d_h, d_h, rng));
  p.mlp_w1 = store.add("reg.mlp.w1", xavier(d_h, d_h, rng));
  p.mlp_b1 = store.add("reg.mlp.b1", Tensor::zeros(1, d_h));
  p.mlp_w2 = store.add("reg.mlp.w2", xavier(d_h, d_h, rng));
  p.mlp_b2 = store.add("reg.mlp.b2", Tensor::zeros(1, d_h));
  return p;
}

namespace {

void require_global(Var v, std::size_t d_h, const char* which) {
  if (v.rows() != 1 || v.cols() != d_h) {
    throw DimensionError(std::string(which) + " is " + nk::to_string(v.shape()) + ", expected [1x" +
                         std::to_string(d_h) + "]");
  }
}

}  // namespace

Var cross_attention(Var v_g, Var t_g, const ParamStore& store, const AttentionParams& p) {
  require_global(v_g, p.d_h, "v_g");
  require_global(t_g, p.d_h, "t_g");
  Tape& tape = v_g.tape();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(p.d_h / p.heads));
  std::vector<Var> outs;
  outs.reserve(p.heads);
  for (std::size_t i = 0; i < p.heads; ++i) {
    Var q = nk::matmul(v_g, tape.param(store, p.wq[i]));
    Var k = nk::matmul(t_g, tape.param(store, p.wk[i]));
    Var a = nk::sigmoid(nk::scale(nk::matmul_nt(q, k), inv_scale));
    outs.push_back(nk::scale_by(nk::matmul(t_g, tape.param(store, p.wv[i])), a));
  }
  return nk::add(t_g, nk::matmul(nk::concat_cols(outs), tape.param(store, p.wm)));
}

std::vector<double> attention_weights(const Tensor& v_g, const Tensor& t_g, const ParamStore& store,
                                      const AttentionParams& p) {
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(p.d_h / p.heads));
  std::vector<double> out;
  for (std::size_t i = 0; i < p.heads; ++i) {
    const Tensor q = nk::matmul(v_g, store[p.wq[i]].value);
    const Tensor k = nk::matmul(t_g, store[p.wk[i]].value);
    double s = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) s += q[c] * k[c];
    out.push_back(1.0 / (1.0 + std::exp(-s * inv_scale)));
  }
  return out;
}

Var global_score(Var m_r, const ParamStore& store, const AttentionParams& p) {
  Tape& tape = m_r.tape();
  Var hidden = nk::relu(nk::add_row(nk::matmul(m_r, tape.param(store, p.mlp_w1)), tape.param(store, p.mlp_b1)));
  return nk::add_row(nk::matmul(hidden, tape.param(store, p.mlp_w2)), tape.param(store, p.mlp_b2));
}

HeadParams HeadParams::create(ParamStore& store, std::size_t d_h, std::size_t classes, double gamma_init,
                              bool learn_gamma, std::mt19937_64& rng) {
  if (classes < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(classes));
  if (!(gamma_init >= 0.0 && gamma_init <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  HeadParams p;
  p.w_c = store.add("head.wc", xavier(d_h, classes, rng));
  p.b_c = store.add("head.bc", Tensor::zeros(1, classes));
  p.learn_gamma = learn_gamma;
  if (learn_gamma) {
    if (gamma_init <= 0.0 || gamma_init >= 1.0) throw ConfigError("a learned gamma must start strictly inside (0,1)");
    p.gamma_logit = store.add("head.gamma_logit", Tensor::scalar(std::log(gamma_init / (1.0 - gamma_init))));
  }
  return p;
}

Classified classify(Var s_g, Var s_r, Var gamma, const ParamStore& store, const HeadParams& p) {
  nk::require_same_shape(s_g.value(), s_r.value(), "classify");
  Tape& tape = s_g.tape();
  // (1 - gamma) s_g + gamma s_r, written so that gamma = 0 or 1 drops the
  // other score exactly.
  Var one_minus = nk::add_scalar(nk::scale(gamma, -1.0), 1.0);
  Var fused = nk::add(nk::scale_by(s_g, one_minus), nk::scale_by(s_r, gamma));
  Var logits = nk::add_row(nk::matmul(fused, tape.param(store, p.w_c)), tape.param(store, p.b_c));
  return {logits, nk::softmax_rows(logits)};
}

Classified classify(Var s_g, Var s_r, double gamma, const ParamStore& store, const HeadParams& p) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  return classify(s_g, s_r, s_g.tape().constant(Tensor::scalar(gamma)), store, p);
}

Var head_gamma(Tape& tape, const ParamStore& store, const HeadParams& p, double fixed) {
  if (p.learn_gamma) return nk::sigmoid(tape.param(store, p.gamma_logit));
  return tape.constant(Tensor::scalar(fixed));
}

namespace {

void check_label(std::size_t label, std::size_t classes) {
  if (label >= classes) {
    throw InputError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) + " classes");
  }
}

}  // namespace

Var cross_entropy(Var probs, std::size_t label) {
  check_label(label, probs.cols());
  return nk::scale(nk::log(nk::pick(probs, 0, label)), -1.0);
}

Var cross_entropy_logits(Var logits, std::size_t label) {
  check_label(label, logits.cols());
  return nk::sub(nk::lse_rows(logits), nk::pick(logits, 0, label));
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  check_label(label, probs.size());
  return -std::log(probs[label]);
}

double mean_loss(std::span<const double> losses) {
  if (losses.empty()) throw InputError("mean of an empty batch");
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

CotParams CotParams::create(ParamStore& store, std::size_t d_h, std::size_t classes, std::mt19937_64& rng) {
  CotParams p;
  p.w = store.add("cot.w", xavier(2 * d_h, classes, rng));
  p.b = store.add("cot.b", Tensor::zeros(1, classes));
  return p;
}

Classified cot_forward(Var v_g, Var t_g, const ParamStore& store, const CotParams& p) {
  Tape& tape = v_g.tape();
  Var joint = nk::concat_cols({v_g, t_g});
  Var logits = nk::add_row(nk::matmul(joint, tape.param(store, p.w)), tape.param(store, p.b));
  return {logits, nk::softmax_rows(logits)};
}

}  // namespace tot::fusionhead
