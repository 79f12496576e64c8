#include "tot/metricsdata/checkpoint.hpp"

#include <fstream>

#include "tot/errors.hpp"

namespace tot::metricsdata {

namespace fs = std::filesystem;

namespace {

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return {
      {"d_h", c.d_h},
      {"n_p2", c.n_p2},
      {"n_s", c.n_s},
      {"classes", c.classes},
      {"kernel", {{"sigma", c.kernel.sigma}, {"feature_dim", c.kernel.feature_dim}, {"rff_seed", c.kernel.rff_seed}}},
      {"sinkhorn",
       {{"epsilon", c.sinkhorn.epsilon},
        {"max_iters", c.sinkhorn.max_iters},
        {"convergence_tol", c.sinkhorn.tol},
        {"last_normalization", c.sinkhorn.last == otcore::Normalization::Row ? "row" : "column"}}},
      {"reason_steps", c.reasoner.steps},
      {"hidden", c.reasoner.hidden},
      {"heads", c.heads},
      {"gamma", c.gamma},
      {"learn_gamma", c.learn_gamma},
      {"variant", to_string(c.variant)},
      {"ablation", {{"ott", c.ablation.ott}, {"oti", c.ablation.oti}, {"dtor", c.ablation.dtor}, {"reg", c.ablation.reg}}},
      {"init_seed", c.init_seed},
  };
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  take(j, "d_h", c.d_h);
  take(j, "n_p2", c.n_p2);
  take(j, "n_s", c.n_s);
  take(j, "classes", c.classes);
  if (j.contains("kernel")) {
    const Json& k = j["kernel"];
    take(k, "sigma", c.kernel.sigma);
    take(k, "feature_dim", c.kernel.feature_dim);
    take(k, "rff_seed", c.kernel.rff_seed);
  }
  if (j.contains("sinkhorn")) {
    const Json& s = j["sinkhorn"];
    take(s, "epsilon", c.sinkhorn.epsilon);
    take(s, "max_iters", c.sinkhorn.max_iters);
    take(s, "convergence_tol", c.sinkhorn.tol);
    std::string last;
    take(s, "last_normalization", last);
    if (last == "row")
      c.sinkhorn.last = otcore::Normalization::Row;
    else if (last == "column")
      c.sinkhorn.last = otcore::Normalization::Column;
    else if (!last.empty())
      throw ConfigError("last_normalization must be 'row' or 'column'");
  }
  take(j, "reason_steps", c.reasoner.steps);
  take(j, "hidden", c.reasoner.hidden);
  take(j, "heads", c.heads);
  take(j, "gamma", c.gamma);
  take(j, "learn_gamma", c.learn_gamma);
  std::string variant;
  take(j, "variant", variant);
  if (!variant.empty()) c.variant = parse_variant(variant);
  if (j.contains("ablation")) {
    const Json& a = j["ablation"];
    take(a, "ott", c.ablation.ott);
    take(a, "oti", c.ablation.oti);
    take(a, "dtor", c.ablation.dtor);
    take(a, "reg", c.ablation.reg);
  }
  take(j, "init_seed", c.init_seed);
  return c;
}

Json to_json(const TrainConfig& c) {
  return {{"optimizer", to_string(c.optimizer)},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"threads", c.threads},
          {"split_train", c.split_train}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  std::string opt;
  take(j, "optimizer", opt);
  if (!opt.empty()) c.optimizer = parse_optimizer(opt);
  take(j, "lr", c.lr);
  take(j, "momentum", c.momentum);
  take(j, "beta1", c.beta1);
  take(j, "beta2", c.beta2);
  take(j, "adam_eps", c.adam_eps);
  take(j, "batch_size", c.batch_size);
  take(j, "epochs", c.epochs);
  take(j, "seed", c.seed);
  take(j, "threads", c.threads);
  take(j, "split_train", c.split_train);
  return c;
}

Json checkpoint_json(const ModelConfig& c, const ParamStore& params) {
  Json ps = Json::array();
  for (const auto& p : params) {
    ps.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.storage()}});
  }
  return {{"format", "tot-checkpoint"}, {"version", 1}, {"config", to_json(c)}, {"params", std::move(ps)}};
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(1) << '\n';
  if (!out) throw LoadError("failed writing " + path.string());
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const fs::path& path, const ModelConfig& c, const ParamStore& params) {
  write_json(path, checkpoint_json(c, params));
}

Model load_checkpoint(const fs::path& path) {
  const Json j = read_json_file(path);
  if (j.value("format", std::string()) != "tot-checkpoint") throw LoadError(path.string() + " is not a checkpoint");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(j.at("config"));
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const Json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  Model model(cfg);
  auto& store = model.params();
  std::vector<bool> seen(store.size(), false);
  try {
    for (const auto& p : j.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto idx = store.find(name);
      if (!idx) throw LoadError(path.string() + ": unknown parameter '" + name + "'");
      numkit::Tensor t(p.at("shape").get<numkit::Shape>(), p.at("data").get<std::vector<double>>());
      if (t.shape() != store[*idx].value.shape()) {
        throw LoadError(path.string() + ": parameter '" + name + "' has shape " + numkit::to_string(t.shape()) +
                        ", model expects " + numkit::to_string(store[*idx].value.shape()));
      }
      store[*idx].value = std::move(t);
      seen[*idx] = true;
    }
  } catch (const Json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw LoadError(path.string() + ": missing parameter '" + store[i].name + "'");
  return model;
}

}  // namespace tot::metricsdata
