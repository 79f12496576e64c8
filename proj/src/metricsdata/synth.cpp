#include "tot/metricsdata/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/tensor_io.hpp"

namespace tot::metricsdata {

namespace {

using Vec = std::vector<double>;

Vec gaussian(std::mt19937_64& rng, std::size_t d, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

Vec normalised(Vec v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0.0)
    for (double& x : v) x /= s;
  return v;
}

// c + noise * z / sqrt(d), renormalised.
Vec perturb(const Vec& c, double noise, std::mt19937_64& rng) {
  Vec z = gaussian(rng, c.size(), noise / std::sqrt(static_cast<double>(c.size())));
  for (std::size_t i = 0; i < c.size(); ++i) z[i] += c[i];
  return normalised(std::move(z));
}

Vec mean_of(const std::vector<Vec>& pool, const std::vector<std::size_t>& ids) {
  Vec m(pool[0].size(), 0.0);
  for (std::size_t id : ids)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += pool[id][i] / static_cast<double>(ids.size());
  return m;
}

Tensor stack(std::size_t rows, std::size_t d, const std::vector<Vec>& pool, const std::vector<std::size_t>& ids,
             double noise, std::mt19937_64& rng) {
  // Every concept appears; slots are shuffled so position carries nothing.
  std::vector<std::size_t> slot(rows);
  for (std::size_t r = 0; r < rows; ++r) slot[r] = ids[r % ids.size()];
  std::shuffle(slot.begin(), slot.end(), rng);
  Tensor t = Tensor::zeros(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec v = perturb(pool[slot[r]], noise, rng);
    std::copy(v.begin(), v.end(), t.row_span(r).begin());
  }
  return numkit::round_to_f32(std::move(t));
}

Tensor as_vector(const Vec& v) { return numkit::round_to_f32(Tensor({v.size()}, v)); }

std::vector<FeatureBundle> make_split(const SynthSpec& spec, const std::vector<Vec>& pool, std::size_t count,
                                      const std::string& prefix, std::mt19937_64& rng) {
  std::vector<FeatureBundle> out;
  std::vector<std::size_t> all(pool.size());
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % spec.classes;
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t k = spec.per_modality;
    std::vector<std::size_t> image(all.begin(), all.begin() + k);
    // Shared concepts come from the image set, the rest from outside it.
    std::vector<std::size_t> text(image.begin(), image.begin() + label);
    text.insert(text.end(), all.begin() + k, all.begin() + k + (k - label));
    std::shuffle(text.begin(), text.end(), rng);

    FeatureBundle b;
    b.label = label;
    b.v = stack(spec.n_p2, spec.d_h, pool, image, spec.noise, rng);
    b.t = stack(spec.n_s, spec.d_h, pool, text, spec.noise, rng);
    b.v_g = as_vector(perturb(mean_of(pool, image), spec.global_noise, rng));
    b.t_g = as_vector(perturb(mean_of(pool, text), spec.global_noise, rng));
    out.push_back(std::move(b));
  }
  std::shuffle(out.begin(), out.end(), rng);
  for (std::size_t i = 0; i < out.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%05zu", prefix.c_str(), i);
    out[i].id = buf;
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (classes < 2 || classes > 3) throw ConfigError("synthetic data supports 2 or 3 classes");
  if (per_modality < classes - 1) throw ConfigError("per_modality must allow classes-1 shared concepts");
  if (concepts < 2 * per_modality) throw ConfigError("concept pool too small for disjoint image/text sets");
  if (d_h == 0 || n_p2 == 0 || n_s == 0) throw ConfigError("synthetic dimensions must be positive");
  if (n_p2 < per_modality || n_s < per_modality) throw ConfigError("too few patches/tokens for the concepts");
  if (!(noise >= 0.0) || !(global_noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (n_train + n_valid + n_test == 0) throw ConfigError("synthetic dataset would be empty");
}

SynthSplits synth_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Vec> pool;
  for (std::size_t i = 0; i < spec.concepts; ++i) pool.push_back(normalised(gaussian(rng, spec.d_h, 1.0)));
  SynthSplits s;
  s.shape.d_h = spec.d_h;
  s.shape.n_p2 = spec.n_p2;
  s.shape.n_s = spec.n_s;
  s.shape.classes = default_class_names(spec.classes);
  s.train = make_split(spec, pool, spec.n_train, "train", rng);
  s.valid = make_split(spec, pool, spec.n_valid, "valid", rng);
  s.test = make_split(spec, pool, spec.n_test, "test", rng);
  return s;
}

std::filesystem::path write_synth(const std::filesystem::path& dir, const SynthSpec& spec) {
  SynthSplits s = synth_dataset(spec);
  std::map<std::string, std::string> index;
  for (auto [name, samples] : {std::pair{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
    if (samples->empty()) continue;
    DatasetManifest m = s.shape;
    m.split = name;
    index[name] = write_dataset(dir, m, *samples).filename().string();
  }
  const auto path = dir / "dataset.json";
  write_index(path, index);
  return path;
}

}  // namespace tot::metricsdata
