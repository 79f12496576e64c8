#include "tot/metricsdata/model.hpp"

#include <random>

#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"
#include "tot/otcore/align.hpp"

namespace tot::metricsdata {

namespace nk = numkit;

std::string to_string(Variant v) { return v == Variant::Tot ? "tot" : "cot"; }

Variant parse_variant(const std::string& s) {
  if (s == "tot") return Variant::Tot;
  if (s == "cot") return Variant::Cot;
  throw ConfigError("variant must be 'tot' or 'cot', got '" + s + "'");
}

void ModelConfig::validate() const {
  if (d_h == 0 || n_p2 == 0 || n_s == 0) throw ConfigError("d_h, n_p2 and n_s must be positive");
  if (classes < 2) throw ConfigError("need at least 2 classes");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  if (heads == 0 || d_h % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide d_h (" + std::to_string(d_h) + ")");
  }
  kernel.validate();
  sinkhorn.validate();
  reasoner.validate();
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  auto kernel = [](const otcore::KernelConfig& k) { return std::tuple(k.sigma, k.feature_dim, k.rff_seed); };
  auto sink = [](const otcore::SinkhornConfig& s) { return std::tuple(s.epsilon, s.max_iters, s.tol, s.last); };
  return a.d_h == b.d_h && a.n_p2 == b.n_p2 && a.n_s == b.n_s && a.classes == b.classes &&
         kernel(a.kernel) == kernel(b.kernel) && sink(a.sinkhorn) == sink(b.sinkhorn) &&
         a.reasoner.steps == b.reasoner.steps && a.reasoner.hidden == b.reasoner.hidden && a.heads == b.heads &&
         a.gamma == b.gamma && a.learn_gamma == b.learn_gamma && a.variant == b.variant &&
         a.ablation == b.ablation && a.init_seed == b.init_seed;
}

namespace {

const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}

bool has_prefix(const std::string& s, const std::string& p) { return s.compare(0, p.size(), p) == 0; }

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(validated(cfg)), rff_(cfg_.d_h, cfg_.kernel) {
  std::mt19937_64 rng(cfg_.init_seed);
  const topograph::GraphDims dims{cfg_.kernel.feature_dim, cfg_.d_h, cfg_.d_h, cfg_.reasoner};
  image_graph_ = topograph::GraphParams::create(params_, "graph.image", dims, rng);
  text_graph_ = topograph::GraphParams::create(params_, "graph.text", dims, rng);
  attention_ = fusionhead::AttentionParams::create(params_, cfg_.d_h, cfg_.heads, rng);
  head_ = fusionhead::HeadParams::create(params_, cfg_.d_h, cfg_.classes, cfg_.gamma, cfg_.learn_gamma, rng);
  cot_ = fusionhead::CotParams::create(params_, cfg_.d_h, cfg_.classes, rng);
}

void Model::set_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  cfg_.gamma = gamma;
}

void Model::set_sinkhorn(const otcore::SinkhornConfig& s) {
  s.validate();
  cfg_.sinkhorn = s;
}

bool Model::uses_graphs() const {
  return cfg_.variant == Variant::Tot && (cfg_.ablation.oti || cfg_.ablation.ott);
}

void Model::check_bundle(const FeatureBundle& b) const {
  DatasetManifest m;
  m.d_h = cfg_.d_h;
  m.n_p2 = cfg_.n_p2;
  m.n_s = cfg_.n_s;
  m.classes.resize(cfg_.classes);
  validate_bundle(b, m);
}

Alignment Model::align(const FeatureBundle& b) const {
  check_bundle(b);
  Alignment out;
  if (!uses_graphs()) return out;
  const auto a_img = otcore::uniform_marginal(cfg_.n_p2), a_txt = otcore::uniform_marginal(cfg_.n_s);
  if (cfg_.ablation.oti) {
    // P(V,T): image patches are the source, text tokens the target slots.
    auto c = otcore::cost_matrix(b.v, b.t, cfg_.kernel);
    auto p = otcore::sinkhorn(c, a_img, a_txt, cfg_.sinkhorn);
    out.aligned_image = otcore::align_nodes(p.values, rff_.embed(b.v), otcore::alignment_scale(cfg_.n_p2));
    out.cost_vt = std::move(c.values);
    out.plan_vt = std::move(p.values);
  }
  if (cfg_.ablation.ott) {
    auto c = otcore::cost_matrix(b.t, b.v, cfg_.kernel);
    auto p = otcore::sinkhorn(c, a_txt, a_img, cfg_.sinkhorn);
    out.aligned_text = otcore::align_nodes(p.values, rff_.embed(b.t), otcore::alignment_scale(cfg_.n_s));
    out.cost_tv = std::move(c.values);
    out.plan_tv = std::move(p.values);
  }
  return out;
}

Forward Model::forward(Tape& tape, const FeatureBundle& b, bool ot_on_tape) const {
  check_bundle(b);
  Var v_g = tape.constant(b.v_g.reshaped({1, cfg_.d_h}));
  Var t_g = tape.constant(b.t_g.reshaped({1, cfg_.d_h}));
  Forward f;
  if (cfg_.variant == Variant::Cot) {
    f.out = fusionhead::cot_forward(v_g, t_g, params_, cot_);
    return f;
  }

  const Ablation& ab = cfg_.ablation;
  // Aligned node features, either precomputed or traced through Sinkhorn.
  Var aligned_image, aligned_text;
  if (ot_on_tape) {
    const auto a_img = otcore::uniform_marginal(cfg_.n_p2), a_txt = otcore::uniform_marginal(cfg_.n_s);
    Var vv = tape.constant(b.v), tt = tape.constant(b.t);
    if (ab.oti) {
      Var p = otcore::sinkhorn(otcore::cost_matrix(vv, tt, cfg_.kernel), a_img, a_txt, cfg_.sinkhorn);
      aligned_image = otcore::align_nodes(p, rff_.embed(vv), otcore::alignment_scale(cfg_.n_p2));
    }
    if (ab.ott) {
      Var p = otcore::sinkhorn(otcore::cost_matrix(tt, vv, cfg_.kernel), a_txt, a_img, cfg_.sinkhorn);
      aligned_text = otcore::align_nodes(p, rff_.embed(tt), otcore::alignment_scale(cfg_.n_s));
    }
  } else if (uses_graphs()) {
    Alignment al = align(b);
    if (al.aligned_image) aligned_image = tape.constant(std::move(*al.aligned_image));
    if (al.aligned_text) aligned_text = tape.constant(std::move(*al.aligned_text));
  }

  std::vector<Var> scores;
  auto run_graph = [&](Var aligned, Var global, const topograph::GraphParams& gp, std::vector<Tensor>& edges) {
    auto g = topograph::build_graph(aligned, global, params_, gp);
    if (ab.dtor) {
      topograph::reason(g, params_, gp);
      edges = g.edge_history;
      scores.push_back(topograph::readout(g, params_, gp));
    } else {
      scores.push_back(topograph::mlp_score(g, params_, gp));
    }
  };
  if (ab.oti) run_graph(aligned_image, v_g, image_graph_, f.image_edges);
  if (ab.ott) run_graph(aligned_text, t_g, text_graph_, f.text_edges);

  Var zero = tape.constant(Tensor::zeros(1, cfg_.d_h));
  Var s_r = zero;
  if (!scores.empty()) {
    s_r = scores[0];
    for (std::size_t i = 1; i < scores.size(); ++i) s_r = nk::add(s_r, scores[i]);
  }
  Var s_g = ab.reg ? fusionhead::global_score(fusionhead::cross_attention(v_g, t_g, params_, attention_), params_,
                                              attention_)
                   : zero;
  // A missing score leaves only the other one on the weighted sum.
  Var gamma;
  if (!ab.reg)
    gamma = tape.constant(Tensor::scalar(1.0));
  else if (scores.empty())
    gamma = tape.constant(Tensor::scalar(0.0));
  else
    gamma = fusionhead::head_gamma(tape, params_, head_, cfg_.gamma);
  f.out = fusionhead::classify(s_g, s_r, gamma, params_, head_);
  return f;
}

double Model::loss_and_grad(const FeatureBundle& b, numkit::Gradients& grads, std::size_t* pred) const {
  Tape tape;
  Forward f = forward(tape, b);
  if (pred) *pred = argmax(f.out.probs.value().data());
  Var loss = fusionhead::cross_entropy_logits(f.out.logits, b.label);
  tape.backward(loss);
  tape.accumulate_param_grads(grads);
  return loss.value()[0];
}

Tensor Model::predict_proba(const FeatureBundle& b) const {
  Tape tape;
  return forward(tape, b).out.probs.value();
}

bool Model::is_graph_param(std::size_t i) const { return has_prefix(params_[i].name, "graph."); }

bool Model::is_reasoning_param(std::size_t i) const {
  const auto& n = params_[i].name;
  return has_prefix(n, "graph.") && (n.find(".layer") != std::string::npos || n.find(".readout.") != std::string::npos);
}

bool Model::is_attention_param(std::size_t i) const { return has_prefix(params_[i].name, "reg."); }

bool Model::is_head_param(std::size_t i) const { return has_prefix(params_[i].name, "head."); }

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace tot::metricsdata
