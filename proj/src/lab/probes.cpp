#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "../parallel.hpp"
#include "feddiv/data/transforms.hpp"
#include "feddiv/error.hpp"
#include "feddiv/fed/federation.hpp"
#include "feddiv/lab/lab.hpp"
#include "feddiv/rng.hpp"
#include "feddiv/stats.hpp"

namespace feddiv::lab {
namespace {

constexpr std::size_t kChunk = 64;

// Per-parameter running mean and sum of squared deviations for one layer.
struct Welford {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t count = 0;

  void add(const std::vector<double>& x) {
    if (mean.empty()) {
      mean.assign(x.size(), 0.0);
      m2.assign(x.size(), 0.0);
    }
    ++count;
    const double k = static_cast<double>(count);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double delta = x[j] - mean[j];
      mean[j] += delta / k;
      m2[j] += delta * (x[j] - mean[j]);
    }
  }

  double divergence() const {
    double total = 0.0;
    for (double v : m2) total += v;
    return std::sqrt(total / static_cast<double>(count) / static_cast<double>(m2.size()));
  }
};

using SampleGrad = std::function<nn::GradientSet(std::size_t)>;

LayerDivergenceProfile profile(const nn::ModelSpec& spec, std::size_t n_samples, std::size_t workers,
                               const SampleGrad& grad_of) {
  const auto layers = nn::parameterized_layers(spec);
  std::vector<Welford> acc(layers.size());
  std::vector<std::vector<std::vector<double>>> chunk;
  for (std::size_t start = 0; start < n_samples; start += kChunk) {
    const std::size_t n = std::min(kChunk, n_samples - start);
    chunk.assign(n, {});
    detail::parallel_for(n, workers, [&](std::size_t i) {
      const nn::GradientSet g = grad_of(start + i);
      auto& flat = chunk[i];
      flat.reserve(layers.size());
      for (int l : layers) flat.push_back(nn::flatten_layer_params(g, l));
    });
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < layers.size(); ++l) acc[l].add(chunk[i][l]);
  }
  LayerDivergenceProfile out;
  for (std::size_t l = 0; l < layers.size(); ++l)
    out.layers.push_back({layers[l], spec.layers[static_cast<std::size_t>(layers[l])].name, acc[l].divergence(),
                          n_samples});
  return out;
}

nn::GradientSet image_grad(const nn::ModelSpec& spec, const nn::ParameterSet& params, const Tensor& image,
                           int label, double loss_scale) {
  Shape batch_shape{1};
  batch_shape.insert(batch_shape.end(), image.shape().begin(), image.shape().end());
  const Tensor batch = image.reshaped(batch_shape);
  const int labels[1] = {label};
  auto lg = nn::loss_and_grad(spec, params, batch, std::span<const int>(labels));
  if (loss_scale != 1.0)
    for (auto& [index, entries] : lg.grads.layers())
      for (auto& e : entries)
        for (auto& v : e.tensor.values()) v *= loss_scale;
  return std::move(lg.grads);
}

void check_common(const nn::ModelSpec& spec, double loss_scale, std::size_t workers) {
  nn::validate(spec);
  if (!std::isfinite(loss_scale)) throw ValidationError("loss_scale must be finite");
  if (workers < 1) throw ValidationError("workers must be >= 1");
}

}  // namespace

const char* probe_kind_name(ProbeKind kind) {
  return kind == ProbeKind::gaussian_noise ? "gaussian_noise" : "same_class";
}

std::vector<double> LayerDivergenceProfile::values() const {
  std::vector<double> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.divergence);
  return out;
}

LayerDivergenceProfile gradient_divergence_noise(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                                 const Tensor& base_image, int label, double sigma,
                                                 std::size_t n_samples, std::uint64_t seed, double loss_scale,
                                                 std::size_t workers) {
  check_common(spec, loss_scale, workers);
  if (n_samples < 2) throw ValidationError("n_samples must be >= 2");
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
  if (base_image.shape() != spec.input_shape)
    throw ShapeError("base image shape " + shape_to_string(base_image.shape()) + " does not match model input " +
                     shape_to_string(spec.input_shape));
  if (label < 0 || label >= spec.num_classes) throw ValidationError("label out of range");
  auto out = profile(spec, n_samples, workers, [&](std::size_t s) {
    Rng rng(derive_seed(seed, s));
    return image_grad(spec, params, data::add_gaussian_noise(base_image, sigma, rng), label, loss_scale);
  });
  out.probe = ProbeKind::gaussian_noise;
  out.sigma = sigma;
  out.seed = seed;
  return out;
}

LayerDivergenceProfile gradient_divergence_class(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                                 const data::Dataset& dataset, int class_id, double loss_scale,
                                                 std::size_t workers) {
  check_common(spec, loss_scale, workers);
  if (dataset.image_shape() != spec.input_shape)
    throw ShapeError("dataset image shape " + shape_to_string(dataset.image_shape()) +
                     " does not match model input " + shape_to_string(spec.input_shape));
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.labels[i] == class_id) members.push_back(i);
  if (members.empty()) throw ValidationError("class " + std::to_string(class_id) + " has no images");
  if (members.size() < 2)
    throw ValidationError("class " + std::to_string(class_id) + " has fewer than 2 images");
  const std::size_t image_size = dataset.image_size();
  auto out = profile(spec, members.size(), workers, [&](std::size_t s) {
    Tensor image(spec.input_shape);
    const double* src = dataset.images.data() + members[s] * image_size;
    std::copy_n(src, image_size, image.data());
    return image_grad(spec, params, image, class_id, loss_scale);
  });
  out.probe = ProbeKind::same_class;
  return out;
}

std::vector<LayerBand> log_bands(const std::vector<LayerDivergenceProfile>& profiles) {
  if (profiles.empty()) throw ValidationError("no profiles to summarise");
  const auto& first = profiles.front().layers;
  std::vector<LayerBand> out;
  for (std::size_t l = 0; l < first.size(); ++l) {
    LayerBand band{first[l].layer_index, first[l].layer_name, std::numeric_limits<double>::infinity(), 0.0,
                   -std::numeric_limits<double>::infinity()};
    for (const auto& p : profiles) {
      if (p.layers.size() != first.size() || p.layers[l].layer_index != first[l].layer_index)
        throw ValidationError("profiles cover different layers");
      const double v = std::log(p.layers[l].divergence);
      band.log_min = std::min(band.log_min, v);
      band.log_max = std::max(band.log_max, v);
      band.log_mean += v;
    }
    band.log_mean /= static_cast<double>(profiles.size());
    out.push_back(band);
  }
  return out;
}

double depth_trend(const LayerDivergenceProfile& profile) {
  std::vector<double> position, log_div;
  for (std::size_t l = 0; l < profile.layers.size(); ++l) {
    position.push_back(static_cast<double>(l));
    log_div.push_back(std::log(profile.layers[l].divergence));
  }
  return spearman(position, log_div);
}

AccumulationReport run_accumulation_experiment(const nn::ModelSpec& deep_spec, const nn::ModelSpec& shallow_spec,
                                               const data::Dataset& dataset, const AccumulationSettings& settings) {
  nn::validate(deep_spec);
  nn::validate(shallow_spec);
  if (settings.seeds.empty()) throw ValidationError("at least one seed is required");
  if (settings.pretrain_epochs < 0) throw ValidationError("pretrain_epochs must be >= 0");
  std::vector<std::size_t> first_of_class;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.labels[i] == settings.probe_class) first_of_class.push_back(i);
  if (first_of_class.empty())
    throw ValidationError("probe class " + std::to_string(settings.probe_class) + " has no images");
  Tensor base(dataset.image_shape());
  std::copy_n(dataset.images.data() + first_of_class.front() * dataset.image_size(), dataset.image_size(),
              base.data());
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  AccumulationReport report;
  report.settings = settings;
  report.shallow.model = "shallow";
  report.deep.model = "deep";
  for (std::uint64_t seed : settings.seeds) {
    const std::uint64_t probe_seed = derive_seed(seed, 4);
    auto run_model = [&](const nn::ModelSpec& spec, std::uint64_t init_tag, ModelProfiles& into) {
      auto params = nn::init_params<double>(spec, derive_seed(seed, init_tag));
      Rng rng(derive_seed(seed, 3));
      params = fed::local_train(spec, params, dataset, all, settings.pretrain_epochs, settings.pretrain_lr,
                                settings.pretrain_batch, rng);
      auto noise = gradient_divergence_noise(spec, params, base, settings.probe_class, settings.sigma,
                                             settings.n_samples, probe_seed, 1.0, settings.workers);
      auto same = gradient_divergence_class(spec, params, dataset, settings.probe_class, 1.0, settings.workers);
      same.seed = seed;
      into.noise_spearman.push_back(depth_trend(noise));
      into.class_spearman.push_back(depth_trend(same));
      into.noise.push_back(std::move(noise));
      into.same_class.push_back(std::move(same));
    };
    run_model(shallow_spec, 2, report.shallow);
    run_model(deep_spec, 1, report.deep);
  }
  return report;
}

}  // namespace feddiv::lab
