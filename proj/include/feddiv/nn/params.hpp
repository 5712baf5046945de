#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "feddiv/nn/model_spec.hpp"
#include "feddiv/tensor.hpp"

namespace feddiv::nn {

struct ParamTag {};
struct GradTag {};

// Per-layer named tensors keyed by layer index; parameterless layers are
// absent. Within a layer, weight tensors come first, then biases:
//   dense / conv2d:  weight, bias
//   residual_block:  conv1.weight, conv2.weight[, proj.weight],
//                    conv1.bias, conv2.bias[, proj.bias]
// Tag separates parameters from gradients at the type level.
template <typename T, typename Tag>
class BasicParamMap {
 public:
  struct Entry {
    std::string name;
    BasicTensor<T> tensor;

    friend bool operator==(const Entry&, const Entry&) = default;
  };
  using LayerEntries = std::vector<Entry>;

  std::map<int, LayerEntries>& layers() noexcept { return layers_; }
  const std::map<int, LayerEntries>& layers() const noexcept { return layers_; }

  bool has_layer(int index) const { return layers_.count(index) != 0; }
  // Throws ValidationError if the layer has no parameters.
  LayerEntries& layer(int index);
  const LayerEntries& layer(int index) const;

  std::size_t parameter_count() const;
  std::size_t layer_parameter_count(int index) const;

  // Identical layer keys, tensor names and shapes.
  template <typename OtherTag>
  bool congruent_with(const BasicParamMap<T, OtherTag>& other) const {
    if (layers_.size() != other.layers().size()) return false;
    auto it = other.layers().begin();
    for (const auto& [index, entries] : layers_) {
      if (it->first != index || it->second.size() != entries.size()) return false;
      for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name != it->second[i].name ||
            entries[i].tensor.shape() != it->second[i].tensor.shape())
          return false;
      ++it;
    }
    return true;
  }

  friend bool operator==(const BasicParamMap&, const BasicParamMap&) = default;

 private:
  std::map<int, LayerEntries> layers_;
};

template <typename T>
using BasicParameterSet = BasicParamMap<T, ParamTag>;
template <typename T>
using BasicGradientSet = BasicParamMap<T, GradTag>;

using ParameterSet = BasicParameterSet<double>;
using GradientSet = BasicGradientSet<double>;

enum class InitScheme { kaiming_uniform, xavier_uniform, orthogonal };

const char* init_scheme_name(InitScheme scheme);
InitScheme parse_init_scheme(const std::string& name);

// Zero tensors with the layout of `spec`. Used for gradient accumulators.
template <typename T, typename Tag>
BasicParamMap<T, Tag> zeros_for(const ModelSpec& spec);

// Weights uniform in +-sqrt(6 / fan_in) (kaiming), +-sqrt(6 / (fan_in + fan_out))
// (xavier), or with orthonormal rows/columns of the (out, fan_in) matrix view
// (orthogonal, gain 1). Biases are zero. Deterministic in (spec, seed, scheme).
template <typename T>
BasicParameterSet<T> init_params(const ModelSpec& spec, std::uint64_t seed,
                                 InitScheme scheme = InitScheme::kaiming_uniform);

// params - lr * grads as a new set; the inputs are untouched. lr must be
// non-negative and the sets congruent (ShapeError otherwise).
template <typename T>
BasicParameterSet<T> sgd_step(const BasicParameterSet<T>& params,
                              const BasicGradientSet<T>& grads, double lr);

template <typename T>
void sgd_step_inplace(BasicParameterSet<T>& params, const BasicGradientSet<T>& grads,
                      double lr);

// Layer parameters concatenated in entry order, each tensor row-major.
template <typename T, typename Tag>
std::vector<T> flatten_layer_params(const BasicParamMap<T, Tag>& params, int layer);

// Inverse of flatten_layer_params; `flat` must have the layer's parameter count.
template <typename T, typename Tag>
void unflatten_layer_params(BasicParamMap<T, Tag>& params, int layer, std::span<const T> flat);

// Parameters cast to another precision.
template <typename To, typename From, typename Tag>
BasicParamMap<To, Tag> cast_params(const BasicParamMap<From, Tag>& params) {
  BasicParamMap<To, Tag> out;
  for (const auto& [index, entries] : params.layers()) {
    auto& dst = out.layers()[index];
    for (const auto& e : entries) {
      std::vector<To> data(e.tensor.values().begin(), e.tensor.values().end());
      dst.push_back({e.name, BasicTensor<To>(e.tensor.shape(), std::move(data))});
    }
  }
  return out;
}

}  // namespace feddiv::nn
