#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <streambuf>

#include "tot/errors.hpp"
#include "tot/metricsdata/checkpoint.hpp"
#include "tot/metricsdata/dataset.hpp"
#include "tot/metricsdata/synth.hpp"
#include "tot/metricsdata/train.hpp"
#include "tot/numkit/tensor_io.hpp"
#include "tot/otcore/exact_ot.hpp"
#include "tot/otcore/sinkhorn.hpp"

namespace tot::cli {

namespace fs = std::filesystem;
namespace md = metricsdata;
using md::Json;
using numkit::Tensor;

namespace {

// Flag values; unset optionals leave the config file or default in place.
struct Flags {
  std::string config, out, data, split, id, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> gamma, epsilon, sigma, lr, momentum;
  std::optional<int> sinkhorn_iters, reason_steps, epochs;
  std::optional<std::size_t> hidden, rff_dim, heads, batch_size;
  std::optional<std::string> variant, optimizer, last_normalization;
  bool no_ott = false, no_oti = false, no_dtor = false, no_reg = false;
  bool split_train = false, learn_gamma = false;

  md::SynthSpec synth;
};

// Everything a run depends on; written to <out>/run_config.json first.
struct RunConfig {
  std::string command;
  md::ModelConfig model;
  md::TrainConfig train;
  std::string data, split, id, checkpoint, out;
};

Json to_json(const RunConfig& r) {
  return {{"command", r.command}, {"model", md::to_json(r.model)}, {"train", md::to_json(r.train)},
          {"data", r.data},       {"split", r.split},              {"id", r.id},
          {"checkpoint", r.checkpoint}, {"out", r.out}};
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON run config; flags override it");
  app->add_option("--out", f.out, "output directory")->required();
  app->add_option("--seed", f.seed, "initialisation and shuffling seed");
  app->add_option("--threads", f.threads, "worker threads (1 gives bitwise-reproducible runs)");
}

void add_model(CLI::App* app, Flags& f) {
  app->add_option("--gamma", f.gamma, "weight of the reasoning score in [0,1]");
  app->add_option("--epsilon", f.epsilon, "entropic regularisation of the transport");
  app->add_option("--sinkhorn-iters", f.sinkhorn_iters, "Sinkhorn iterations");
  app->add_option("--last-normalization", f.last_normalization, "row or column");
  app->add_option("--reason-steps", f.reason_steps, "topology reasoning steps N");
  app->add_option("--hidden", f.hidden, "graph node width h");
  app->add_option("--rff-dim", f.rff_dim, "random Fourier feature count");
  app->add_option("--sigma", f.sigma, "Gaussian kernel bandwidth");
  app->add_option("--heads", f.heads, "cross-attention heads");
  app->add_option("--variant", f.variant, "tot or cot");
  app->add_flag("--learn-gamma", f.learn_gamma, "learn gamma instead of fixing it");
  app->add_flag("--no-ott", f.no_ott, "drop the text graph");
  app->add_flag("--no-oti", f.no_oti, "drop the image graph");
  app->add_flag("--no-dtor", f.no_dtor, "replace topology reasoning by an MLP");
  app->add_flag("--no-reg", f.no_reg, "drop the residual global interaction");
}

void add_train(CLI::App* app, Flags& f) {
  app->add_option("--epochs", f.epochs, "training epochs");
  app->add_option("--lr", f.lr, "learning rate");
  app->add_option("--batch-size", f.batch_size, "samples per update");
  app->add_option("--optimizer", f.optimizer, "adam or sgd");
  app->add_option("--momentum", f.momentum, "SGD momentum");
  app->add_flag("--split-train", f.split_train, "alternate graph and REG epochs, freezing the other");
}

// Sinkhorn, gamma and ablation settings may differ from training; anything
// that changes the parameter layout may not.
void apply_runtime_flags(const Flags& f, md::ModelConfig& m) {
  if (f.gamma) m.gamma = *f.gamma;
  if (f.epsilon) m.sinkhorn.epsilon = *f.epsilon;
  if (f.sinkhorn_iters) m.sinkhorn.max_iters = *f.sinkhorn_iters;
  if (f.last_normalization) {
    if (*f.last_normalization == "row")
      m.sinkhorn.last = otcore::Normalization::Row;
    else if (*f.last_normalization == "column")
      m.sinkhorn.last = otcore::Normalization::Column;
    else
      throw ConfigError("--last-normalization must be 'row' or 'column'");
  }
  if (f.no_ott) m.ablation.ott = false;
  if (f.no_oti) m.ablation.oti = false;
  if (f.no_dtor) m.ablation.dtor = false;
  if (f.no_reg) m.ablation.reg = false;
}

void apply_structural_flags(const Flags& f, md::ModelConfig& m) {
  if (f.reason_steps) m.reasoner.steps = *f.reason_steps;
  if (f.hidden) m.reasoner.hidden = *f.hidden;
  if (f.rff_dim) m.kernel.feature_dim = *f.rff_dim;
  if (f.sigma) m.kernel.sigma = *f.sigma;
  if (f.heads) m.heads = *f.heads;
  if (f.variant) m.variant = md::parse_variant(*f.variant);
  if (f.learn_gamma) m.learn_gamma = true;
  if (f.seed) m.init_seed = *f.seed;
}

RunConfig base_config(const std::string& command, const Flags& f) {
  RunConfig r;
  r.command = command;
  if (!f.config.empty()) {
    const Json j = md::read_json_file(f.config);
    if (!j.is_object()) throw ConfigError(f.config + ": run config must be a JSON object");
    if (j.contains("model")) r.model = md::model_config_from_json(j["model"], r.model);
    if (j.contains("train")) r.train = md::train_config_from_json(j["train"], r.train);
    for (auto [key, field] : {std::pair{"data", &r.data}, {"split", &r.split}, {"id", &r.id},
                              {"checkpoint", &r.checkpoint}}) {
      if (j.contains(key)) {
        if (!j[key].is_string()) throw ConfigError(f.config + ": '" + key + "' must be a string");
        *field = j[key].get<std::string>();
      }
    }
  }
  if (!f.data.empty()) r.data = f.data;
  if (!f.split.empty()) r.split = f.split;
  if (!f.id.empty()) r.id = f.id;
  if (!f.checkpoint.empty()) r.checkpoint = f.checkpoint;
  r.data = absolute(r.data);
  r.checkpoint = absolute(r.checkpoint);
  r.out = absolute(f.out);
  if (f.seed) r.train.seed = *f.seed;
  if (f.threads) r.train.threads = *f.threads;
  return r;
}

void write_snapshot(const RunConfig& r) {
  fs::create_directories(r.out);
  md::write_json(fs::path(r.out) / "run_config.json", to_json(r));
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing ") + what);
}

// Copies everything written to it into two streams.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    const auto ch = traits_type::to_char_type(c);
    if (a_->sputc(ch) == traits_type::eof() || b_->sputc(ch) == traits_type::eof()) return traits_type::eof();
    return c;
  }
  int sync() override { return a_->pubsync() | b_->pubsync(); }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

std::optional<md::Dataset> load_split_if_present(const std::string& data, const std::string& split) {
  const Json j = md::read_json_file(data);
  if (j.contains("splits") && !j["splits"].contains(split)) return std::nullopt;
  if (!j.contains("splits") && split != "train") return std::nullopt;
  return md::load_dataset(md::resolve_split(data, j.contains("splits") ? split : ""));
}

std::string metrics_line(const md::Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "acc=%.6f macro_f1=%.6f mmae=%.6f", m.acc, m.macro_f1, m.mmae);
  return buf;
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig r = base_config("train", f);
  apply_structural_flags(f, r.model);
  apply_runtime_flags(f, r.model);
  if (f.epochs) r.train.epochs = *f.epochs;
  if (f.lr) r.train.lr = *f.lr;
  if (f.batch_size) r.train.batch_size = *f.batch_size;
  if (f.optimizer) r.train.optimizer = md::parse_optimizer(*f.optimizer);
  if (f.momentum) r.train.momentum = *f.momentum;
  if (f.split_train) r.train.split_train = true;
  require(r.data, "--data");
  r.model.validate();
  r.train.validate();

  const auto train_set = load_split_if_present(r.data, "train");
  if (!train_set) throw InputError(r.data + " has no 'train' split");
  const auto valid_set = load_split_if_present(r.data, "valid");
  const auto test_set = load_split_if_present(r.data, "test");
  const auto& shape = train_set->manifest;
  r.model.d_h = shape.d_h;
  r.model.n_p2 = shape.n_p2;
  r.model.n_s = shape.n_s;
  r.model.classes = shape.classes.size();
  r.model.validate();
  write_snapshot(r);

  const fs::path dir = r.out;
  std::ofstream log_file(dir / "run.log"), csv(dir / "metrics.csv");
  TeeBuf tee(log_file.rdbuf(), out.rdbuf());
  std::ostream log(&tee);
  log << "train variant=" << md::to_string(r.model.variant) << " samples=" << train_set->samples.size()
      << " valid=" << (valid_set ? valid_set->samples.size() : 0) << " epochs=" << r.train.epochs << '\n';

  md::Model model(r.model);
  md::TrainHooks hooks;
  hooks.log = &log;
  hooks.csv = &csv;
  md::TrainResult result;
  try {
    result = md::train(model, *train_set, valid_set ? &*valid_set : nullptr, r.train, hooks);
  } catch (const NumericError& e) {
    log << "diverged: " << e.what() << '\n';
    throw;
  }
  model.params() = result.best_params;
  md::save_checkpoint(dir / "checkpoint.json", model.config(), model.params());
  log << "best epoch " << result.best_epoch << " macro_f1=" << result.best_macro_f1 << '\n';
  if (test_set) {
    const auto ev = md::evaluate(model, *test_set, r.train.threads);
    csv << md::csv_row({result.best_epoch, "test", ev.metrics, ev.loss}) << '\n';
    log << "test " << metrics_line(ev.metrics) << '\n';
  }
  log.flush();
  return kExitOk;
}

// Loads the checkpoint and applies the runtime flags. Structural flags must
// agree with the stored configuration.
md::Model load_model(const Flags& f, RunConfig& r) {
  require(r.checkpoint, "--checkpoint");
  md::Model model = md::load_checkpoint(r.checkpoint);
  md::ModelConfig want = model.config();
  apply_structural_flags(f, want);
  want.init_seed = model.config().init_seed;
  if (!(want == model.config())) {
    throw ConfigError("flags change the parameter layout of " + r.checkpoint +
                      "; only gamma, Sinkhorn and ablation settings may differ");
  }
  md::ModelConfig cfg = model.config();
  apply_runtime_flags(f, cfg);
  cfg.validate();
  model.set_ablation(cfg.ablation);
  model.set_gamma(cfg.gamma);
  model.set_sinkhorn(cfg.sinkhorn);
  r.model = model.config();
  return model;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  RunConfig r = base_config("eval", f);
  if (r.split.empty()) r.split = "test";
  require(r.data, "--data");
  md::Model model = load_model(f, r);
  const md::Dataset data = md::load_dataset(md::resolve_split(r.data, r.split));
  write_snapshot(r);
  const auto ev = md::evaluate(model, data, r.train.threads);
  const fs::path dir = r.out;
  std::ofstream csv(dir / "eval.csv");
  csv << md::csv_header() << '\n' << md::csv_row({0, data.manifest.split, ev.metrics, ev.loss}) << '\n';
  std::ofstream preds(dir / "predictions.csv");
  preds << "id,label,pred\n";
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    preds << data.samples[i].id << ',' << data.samples[i].label << ',' << ev.preds[i] << '\n';
  out << data.manifest.split << ' ' << metrics_line(ev.metrics) << '\n';
  return kExitOk;
}

md::FeatureBundle find_sample(const RunConfig& r) {
  require(r.data, "--data");
  require(r.id, "--id");
  std::vector<fs::path> manifests;
  const Json j = md::read_json_file(r.data);
  if (!r.split.empty() || !j.contains("splits")) {
    manifests.push_back(md::resolve_split(r.data, r.split));
  } else {
    for (const auto& [name, file] : j["splits"].items())
      manifests.push_back(fs::path(r.data).parent_path() / file.get<std::string>());
  }
  for (const auto& m : manifests) {
    md::Dataset d = md::load_dataset(m);
    for (auto& s : d.samples)
      if (s.id == r.id) return std::move(s);
  }
  throw InputError("unknown sample id '" + r.id + "'");
}

void require_graphs(const md::ModelConfig& c) {
  if (c.variant == md::Variant::Cot) throw ConfigError("the cot variant has no transport plans or graphs");
  if (!c.ablation.ott && !c.ablation.oti) throw ConfigError("both graphs are disabled");
}

Json tensor_entry(const fs::path& dir, const std::string& name, const Tensor& t) {
  const std::string file = name + ".bin";
  numkit::save_tensor(dir / file, t);
  return {{"file", file}, {"shape", t.shape()}};
}

int cmd_align(const Flags& f, std::ostream& out) {
  RunConfig r = base_config("align", f);
  md::Model model = load_model(f, r);
  require_graphs(model.config());
  const md::FeatureBundle b = find_sample(r);
  write_snapshot(r);
  const fs::path dir = r.out;
  const md::Alignment al = model.align(b);
  const auto& c = model.config();
  Json index = {{"id", b.id},
                {"label", b.label},
                {"epsilon", c.sinkhorn.epsilon},
                {"sinkhorn_iters", c.sinkhorn.max_iters},
                {"last_normalization", c.sinkhorn.last == otcore::Normalization::Row ? "row" : "column"}};
  auto direction = [&](const char* key, const Tensor& cost, const Tensor& plan, const Tensor& aligned,
                       std::size_t n_src, std::size_t n_tgt) {
    const auto a = otcore::uniform_marginal(n_src), bm = otcore::uniform_marginal(n_tgt);
    const std::string k = key;
    Json e = {{"cost", tensor_entry(dir, "cost_" + k, cost)},
              {"plan", tensor_entry(dir, "plan_" + k, plan)},
              {"aligned", tensor_entry(dir, "aligned_" + k, aligned)},
              {"row_violation", otcore::row_violation(plan, a)},
              {"col_violation", otcore::col_violation(plan, bm)},
              {"transport_cost", otcore::transport_cost(cost, plan)}};
    if (n_src <= otcore::kMaxExactSide && n_tgt <= otcore::kMaxExactSide)
      e["exact_cost"] = otcore::exact_ot(cost, a, bm).cost;
    index[k] = std::move(e);
    out << k << ": transport cost " << otcore::transport_cost(cost, plan) << '\n';
  };
  // "vt": image patches transported onto text slots (image graph);
  // "tv": text tokens onto image slots (text graph).
  if (al.plan_vt) direction("vt", *al.cost_vt, *al.plan_vt, *al.aligned_image, c.n_p2, c.n_s);
  if (al.plan_tv) direction("tv", *al.cost_tv, *al.plan_tv, *al.aligned_text, c.n_s, c.n_p2);
  md::write_json(dir / "align.json", index);
  return kExitOk;
}

void write_edges_csv(const fs::path& path, const Tensor& e) {
  std::ofstream csv(path);
  char buf[32];
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = 0; j < e.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", e(i, j));
      csv << (j ? "," : "") << buf;
    }
    csv << '\n';
  }
  if (!csv) throw LoadError("failed writing " + path.string());
}

int cmd_heatmap(const Flags& f, std::ostream& out) {
  RunConfig r = base_config("heatmap", f);
  md::Model model = load_model(f, r);
  require_graphs(model.config());
  const md::FeatureBundle b = find_sample(r);
  write_snapshot(r);
  const fs::path dir = r.out;
  numkit::Tape tape;
  const md::Forward fw = model.forward(tape, b);
  // Row 0 of every file is the global node's outgoing edge row.
  Json index = {{"id", b.id}, {"label", b.label}, {"probs", fw.out.probs.value().storage()}};
  std::size_t files = 0;
  for (auto [name, edges] : {std::pair{"image", &fw.image_edges}, {"text", &fw.text_edges}}) {
    Json list = Json::array();
    for (std::size_t n = 0; n < edges->size(); ++n) {
      const std::string file = std::string(name) + "_step" + std::to_string(n + 1) + ".csv";
      write_edges_csv(dir / file, (*edges)[n]);
      const auto g = (*edges)[n].row_span(0);
      list.push_back({{"file", file}, {"global_row", std::vector<double>(g.begin(), g.end())}});
      ++files;
    }
    if (!edges->empty()) index[name] = std::move(list);
  }
  md::write_json(dir / "heatmap.json", index);
  out << "wrote " << files << " edge matrices for " << b.id << '\n';
  return kExitOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  const fs::path dir = absolute(f.out);
  fs::create_directories(dir);
  md::SynthSpec s = f.synth;
  if (f.seed) s.seed = *f.seed;
  s.validate();
  md::write_json(dir / "run_config.json",
                 {{"command", "synth"},
                  {"synth",
                   {{"classes", s.classes}, {"n_train", s.n_train}, {"n_valid", s.n_valid}, {"n_test", s.n_test},
                    {"noise", s.noise}, {"global_noise", s.global_noise}, {"d_h", s.d_h}, {"n_p2", s.n_p2},
                    {"n_s", s.n_s}, {"concepts", s.concepts}, {"per_modality", s.per_modality}, {"seed", s.seed}}},
                  {"out", dir.string()}});
  const auto index = md::write_synth(dir, s);
  out << "wrote " << index.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology-aware optimal transport for multimodal hate detection", "tot"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, log and metrics");
  add_common(train, f);
  add_model(train, f);
  add_train(train, f);
  train->add_option("--data", f.data, "dataset index or train manifest");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  add_common(eval, f);
  add_model(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint.json from train");
  eval->add_option("--data", f.data, "dataset index or manifest");
  eval->add_option("--split", f.split, "split to evaluate (default test)");

  auto* align = app.add_subcommand("align", "export costs, plans and aligned nodes for one sample");
  auto* heatmap = app.add_subcommand("heatmap", "export per-step edge matrices for one sample");
  for (auto* sub : {align, heatmap}) {
    add_common(sub, f);
    add_model(sub, f);
    sub->add_option("--checkpoint", f.checkpoint, "checkpoint.json from train");
    sub->add_option("--data", f.data, "dataset index or manifest");
    sub->add_option("--split", f.split, "restrict the id lookup to one split");
    sub->add_option("--id", f.id, "sample id");
  }

  auto* synth = app.add_subcommand("synth", "generate the synthetic alignment dataset");
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option("--seed", f.seed, "generator seed");
  synth->add_option("--classes", f.synth.classes, "2 or 3");
  synth->add_option("--noise", f.synth.noise, "patch and token noise");
  synth->add_option("--global-noise", f.synth.global_noise, "global vector noise");
  synth->add_option("--n-train", f.synth.n_train, "training samples");
  synth->add_option("--n-valid", f.synth.n_valid, "validation samples");
  synth->add_option("--n-test", f.synth.n_test, "test samples");
  synth->add_option("--d-h", f.synth.d_h, "feature width");
  synth->add_option("--n-p2", f.synth.n_p2, "image patches per sample");
  synth->add_option("--n-s", f.synth.n_s, "text tokens per sample");
  synth->add_option("--concepts", f.synth.concepts, "concept pool size");
  synth->add_option("--per-modality", f.synth.per_modality, "concepts per image and per text");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, out);
    if (align->parsed()) return cmd_align(f, out);
    if (heatmap->parsed()) return cmd_heatmap(f, out);
    if (synth->parsed()) return cmd_synth(f, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tot::cli
