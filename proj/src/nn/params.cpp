#include "feddiv/nn/params.hpp"

#include <cmath>

#include "feddiv/kernels/kernels.hpp"
#include "feddiv/rng.hpp"

namespace feddiv::nn {
namespace {

struct TensorLayout {
  std::string name;
  Shape shape;
  bool is_weight;
  std::size_t fan_in;
  std::size_t fan_out;
};

void conv_layout(std::vector<TensorLayout>& weights, std::vector<TensorLayout>& biases,
                 const std::string& prefix, int in_ch, int out_ch, int kernel) {
  const auto ic = static_cast<std::size_t>(in_ch);
  const auto oc = static_cast<std::size_t>(out_ch);
  const auto k = static_cast<std::size_t>(kernel);
  weights.push_back({prefix + "weight", {oc, ic, k, k}, true, ic * k * k, oc * k * k});
  biases.push_back({prefix + "bias", {oc}, false, 0, 0});
}

std::vector<TensorLayout> layer_layout(const LayerSpec& layer) {
  std::vector<TensorLayout> weights, biases;
  switch (layer.type()) {
    case LayerType::dense: {
      const auto& d = std::get<DenseLayer>(layer.op);
      const auto in = static_cast<std::size_t>(d.in_dim);
      const auto out = static_cast<std::size_t>(d.out_dim);
      weights.push_back({"weight", {out, in}, true, in, out});
      biases.push_back({"bias", {out}, false, 0, 0});
      break;
    }
    case LayerType::conv2d: {
      const auto& c = std::get<Conv2dLayer>(layer.op);
      conv_layout(weights, biases, "", c.in_ch, c.out_ch, c.kernel);
      break;
    }
    case LayerType::residual_block: {
      const auto& r = std::get<ResidualBlockLayer>(layer.op);
      conv_layout(weights, biases, "conv1.", r.in_ch, r.out_ch, 3);
      conv_layout(weights, biases, "conv2.", r.out_ch, r.out_ch, 3);
      if (r.has_projection()) conv_layout(weights, biases, "proj.", r.in_ch, r.out_ch, 1);
      break;
    }
    default:
      break;
  }
  weights.insert(weights.end(), biases.begin(), biases.end());
  return weights;
}

// Orthonormal rows (rows <= cols) or columns of a rows x cols Gaussian matrix,
// by modified Gram-Schmidt.
std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const bool transpose = rows > cols;
  const std::size_t r = transpose ? cols : rows;
  const std::size_t c = transpose ? rows : cols;
  std::vector<double> m(r * c);
  for (auto& v : m) v = rng.normal();
  for (std::size_t i = 0; i < r; ++i) {
    double* vi = m.data() + i * c;
    for (std::size_t j = 0; j < i; ++j) {
      const double* vj = m.data() + j * c;
      double proj = 0.0;
      for (std::size_t t = 0; t < c; ++t) proj += vi[t] * vj[t];
      for (std::size_t t = 0; t < c; ++t) vi[t] -= proj * vj[t];
    }
    double norm = 0.0;
    for (std::size_t t = 0; t < c; ++t) norm += vi[t] * vi[t];
    norm = std::sqrt(norm);
    for (std::size_t t = 0; t < c; ++t) vi[t] /= norm;
  }
  if (!transpose) return m;
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t t = 0; t < c; ++t) out[t * cols + i] = m[i * c + t];
  return out;
}

template <typename T, typename Tag>
void require_congruent(const BasicParamMap<T, ParamTag>& a, const BasicParamMap<T, Tag>& b) {
  if (!a.congruent_with(b)) throw ShapeError("parameter and gradient sets are not congruent");
}

}  // namespace

template <typename T, typename Tag>
typename BasicParamMap<T, Tag>::LayerEntries& BasicParamMap<T, Tag>::layer(int index) {
  auto it = layers_.find(index);
  if (it == layers_.end())
    throw ValidationError("layer " + std::to_string(index) + " has no parameters");
  return it->second;
}

template <typename T, typename Tag>
const typename BasicParamMap<T, Tag>::LayerEntries& BasicParamMap<T, Tag>::layer(int index) const {
  auto it = layers_.find(index);
  if (it == layers_.end())
    throw ValidationError("layer " + std::to_string(index) + " has no parameters");
  return it->second;
}

template <typename T, typename Tag>
std::size_t BasicParamMap<T, Tag>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [index, entries] : layers_)
    for (const auto& e : entries) n += e.tensor.size();
  return n;
}

template <typename T, typename Tag>
std::size_t BasicParamMap<T, Tag>::layer_parameter_count(int index) const {
  std::size_t n = 0;
  for (const auto& e : layer(index)) n += e.tensor.size();
  return n;
}

template class BasicParamMap<double, ParamTag>;
template class BasicParamMap<double, GradTag>;
template class BasicParamMap<float, ParamTag>;
template class BasicParamMap<float, GradTag>;

const char* init_scheme_name(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kaiming_uniform:
      return "kaiming_uniform";
    case InitScheme::xavier_uniform:
      return "xavier_uniform";
    case InitScheme::orthogonal:
      return "orthogonal";
  }
  return "unknown";
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "kaiming_uniform") return InitScheme::kaiming_uniform;
  if (name == "xavier_uniform") return InitScheme::xavier_uniform;
  if (name == "orthogonal") return InitScheme::orthogonal;
  throw ValidationError("unknown init scheme '" + name + "'");
}

template <typename T, typename Tag>
BasicParamMap<T, Tag> zeros_for(const ModelSpec& spec) {
  BasicParamMap<T, Tag> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_parameters()) continue;
    auto& entries = out.layers()[static_cast<int>(i)];
    for (auto& t : layer_layout(spec.layers[i])) entries.push_back({t.name, BasicTensor<T>(t.shape)});
  }
  return out;
}

template <typename T>
BasicParameterSet<T> init_params(const ModelSpec& spec, std::uint64_t seed, InitScheme scheme) {
  validate(spec);
  Rng rng(seed);
  BasicParameterSet<T> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_parameters()) continue;
    auto& entries = out.layers()[static_cast<int>(i)];
    for (auto& t : layer_layout(spec.layers[i])) {
      BasicTensor<T> tensor(t.shape);
      if (t.is_weight) {
        if (scheme == InitScheme::orthogonal) {
          const std::size_t rows = t.shape[0];
          const auto m = orthogonal_matrix(rows, tensor.size() / rows, rng);
          for (std::size_t j = 0; j < m.size(); ++j) tensor[j] = static_cast<T>(m[j]);
        } else {
          const double bound = scheme == InitScheme::kaiming_uniform
                                   ? std::sqrt(6.0 / static_cast<double>(t.fan_in))
                                   : std::sqrt(6.0 / static_cast<double>(t.fan_in + t.fan_out));
          for (auto& v : tensor.values()) v = static_cast<T>(rng.uniform(-bound, bound));
        }
      }
      entries.push_back({t.name, std::move(tensor)});
    }
  }
  return out;
}

template <typename T>
void sgd_step_inplace(BasicParameterSet<T>& params, const BasicGradientSet<T>& grads, double lr) {
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  require_congruent(params, grads);
  if (lr == 0.0) return;
  auto git = grads.layers().begin();
  for (auto& [index, entries] : params.layers()) {
    for (std::size_t j = 0; j < entries.size(); ++j) {
      auto& p = entries[j].tensor;
      const auto& g = git->second[j].tensor;
      kernels::axpy<T>(p.size(), static_cast<T>(-lr), g.data(), p.data());
    }
    ++git;
  }
}

template <typename T>
BasicParameterSet<T> sgd_step(const BasicParameterSet<T>& params, const BasicGradientSet<T>& grads,
                              double lr) {
  BasicParameterSet<T> out = params;
  sgd_step_inplace(out, grads, lr);
  return out;
}

template <typename T, typename Tag>
std::vector<T> flatten_layer_params(const BasicParamMap<T, Tag>& params, int layer) {
  if (!params.has_layer(layer))
    throw ValidationError("layer " + std::to_string(layer) + " has no parameters to flatten");
  std::vector<T> flat;
  flat.reserve(params.layer_parameter_count(layer));
  for (const auto& e : params.layer(layer))
    flat.insert(flat.end(), e.tensor.values().begin(), e.tensor.values().end());
  return flat;
}

template <typename T, typename Tag>
void unflatten_layer_params(BasicParamMap<T, Tag>& params, int layer, std::span<const T> flat) {
  auto& entries = params.layer(layer);
  if (flat.size() != params.layer_parameter_count(layer))
    throw ShapeError("flat vector has " + std::to_string(flat.size()) + " values, layer " +
                     std::to_string(layer) + " has " +
                     std::to_string(params.layer_parameter_count(layer)));
  std::size_t offset = 0;
  for (auto& e : entries) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), e.tensor.size(), e.tensor.data());
    offset += e.tensor.size();
  }
}

#define FEDDIV_INSTANTIATE(T)                                                                      \
  template BasicParamMap<T, ParamTag> zeros_for<T, ParamTag>(const ModelSpec&);                    \
  template BasicParamMap<T, GradTag> zeros_for<T, GradTag>(const ModelSpec&);                      \
  template BasicParameterSet<T> init_params<T>(const ModelSpec&, std::uint64_t, InitScheme);       \
  template void sgd_step_inplace<T>(BasicParameterSet<T>&, const BasicGradientSet<T>&, double);    \
  template BasicParameterSet<T> sgd_step<T>(const BasicParameterSet<T>&,                           \
                                            const BasicGradientSet<T>&, double);                   \
  template std::vector<T> flatten_layer_params<T, ParamTag>(const BasicParamMap<T, ParamTag>&, int); \
  template std::vector<T> flatten_layer_params<T, GradTag>(const BasicParamMap<T, GradTag>&, int); \
  template void unflatten_layer_params<T, ParamTag>(BasicParamMap<T, ParamTag>&, int,              \
                                                    std::span<const T>);                           \
  template void unflatten_layer_params<T, GradTag>(BasicParamMap<T, GradTag>&, int,                \
                                                   std::span<const T>);

FEDDIV_INSTANTIATE(double)
FEDDIV_INSTANTIATE(float)

#undef FEDDIV_INSTANTIATE

}  // namespace feddiv::nn
