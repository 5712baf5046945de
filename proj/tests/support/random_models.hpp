#pragma once

// Small random model instances, one family per layer kind, for gradient and
// property tests.

#include <cstdint>
#include <vector>

#include "feddiv/nn/model_spec.hpp"
#include "feddiv/nn/params.hpp"
#include "feddiv/rng.hpp"

namespace feddiv::testing {

enum class Family { dense, conv2d, relu, maxpool2d, global_avg_pool, flatten, residual_block };

inline const std::vector<Family>& all_families() {
  static const std::vector<Family> f = {Family::dense,           Family::conv2d,  Family::relu,
                                        Family::maxpool2d,       Family::global_avg_pool,
                                        Family::flatten,         Family::residual_block};
  return f;
}

inline const char* family_name(Family f) {
  return nn::layer_type_name(static_cast<nn::LayerType>(static_cast<int>(f)));
}

inline int pick(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1)));
}

// A small spec exercising the given layer kind, sized from rng.
inline nn::ModelSpec random_spec(Family family, Rng& rng) {
  using namespace nn;
  ModelSpec spec;
  const int classes = pick(rng, 2, 4);
  spec.num_classes = classes;
  auto add = [&](LayerOp op) { spec.layers.push_back({"", op}); };
  switch (family) {
    case Family::dense: {
      const int in = pick(rng, 2, 6), hidden = pick(rng, 2, 6);
      spec.input_shape = {static_cast<std::size_t>(in)};
      add(DenseLayer{in, hidden});
      add(DenseLayer{hidden, classes});
      break;
    }
    case Family::relu: {
      const int in = pick(rng, 2, 6), hidden = pick(rng, 3, 7);
      spec.input_shape = {static_cast<std::size_t>(in)};
      add(DenseLayer{in, hidden});
      add(ReluLayer{});
      add(DenseLayer{hidden, classes});
      break;
    }
    case Family::conv2d: {
      const int c = pick(rng, 1, 3), oc = pick(rng, 1, 3), k = pick(rng, 1, 3);
      const int stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
      const int h = pick(rng, 4, 6), w = pick(rng, 4, 6);
      spec.input_shape = {static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                          static_cast<std::size_t>(w)};
      add(Conv2dLayer{c, oc, k, stride, pad});
      add(FlattenLayer{});
      spec.layers.push_back({"", DenseLayer{0, classes}});
      break;
    }
    case Family::maxpool2d: {
      const int c = pick(rng, 1, 2), h = pick(rng, 4, 6), w = pick(rng, 4, 6);
      const int k = pick(rng, 2, 3), stride = pick(rng, 1, 2);
      spec.input_shape = {static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                          static_cast<std::size_t>(w)};
      add(Conv2dLayer::same(c, 2, 3));
      add(MaxPool2dLayer{k, stride});
      add(FlattenLayer{});
      spec.layers.push_back({"", DenseLayer{0, classes}});
      break;
    }
    case Family::global_avg_pool: {
      const int c = pick(rng, 1, 2), oc = pick(rng, 2, 4), h = pick(rng, 3, 5);
      spec.input_shape = {static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                          static_cast<std::size_t>(h)};
      add(Conv2dLayer::same(c, oc, 3));
      add(GlobalAvgPoolLayer{});
      add(DenseLayer{oc, classes});
      break;
    }
    case Family::flatten: {
      const int c = pick(rng, 1, 3), h = pick(rng, 2, 4), w = pick(rng, 2, 4);
      spec.input_shape = {static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                          static_cast<std::size_t>(w)};
      add(FlattenLayer{});
      add(DenseLayer{c * h * w, classes});
      break;
    }
    case Family::residual_block: {
      const int c = pick(rng, 1, 3), h = pick(rng, 4, 5);
      const bool project = rng.uniform() < 0.5;
      const int oc = project ? pick(rng, 1, 3) : c;
      const int stride = project ? pick(rng, 1, 2) : 1;
      spec.input_shape = {static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                          static_cast<std::size_t>(h)};
      add(ResidualBlockLayer{c, oc, stride});
      add(GlobalAvgPoolLayer{});
      add(DenseLayer{oc, classes});
      break;
    }
  }
  // Resolve dense input widths left as 0 after a flatten.
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (auto* d = std::get_if<DenseLayer>(&spec.layers[i].op); d && d->in_dim == 0) {
      ModelSpec prefix{spec.input_shape, {spec.layers.begin(), spec.layers.begin() + i}, 0};
      d->in_dim = static_cast<int>(shape_size(infer_shapes(prefix).back()));
    }
  }
  assign_default_names(spec);
  return spec;
}

// Parameters with all entries (biases included) drawn uniformly, so bias
// paths are exercised.
inline nn::ParameterSet random_params(const nn::ModelSpec& spec, Rng& rng, double scale = 0.8) {
  auto params = nn::init_params<double>(spec, rng.next_u64());
  for (auto& [index, entries] : params.layers())
    for (auto& e : entries)
      for (auto& v : e.tensor.values()) v = rng.uniform(-scale, scale);
  return params;
}

inline Tensor random_batch(const nn::ModelSpec& spec, std::size_t batch, Rng& rng) {
  Shape shape{batch};
  shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  Tensor x(shape);
  for (auto& v : x.values()) v = rng.uniform(-1.0, 1.0);
  return x;
}

inline std::vector<int> random_labels(const nn::ModelSpec& spec, std::size_t batch, Rng& rng) {
  std::vector<int> labels(batch);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(spec.num_classes)));
  return labels;
}

}  // namespace feddiv::testing
