#include <set>

#include "feddiv/arch/arch.hpp"

namespace feddiv::arch {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "'", where + "." + key);
}

int get_int(const json& obj, const std::string& key, const std::string& where, std::optional<int> fallback = {}) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key", where + "." + key);
  }
  if (!it->is_number_integer()) throw ConfigError("must be an integer", where + "." + key);
  return it->get<int>();
}

nn::LayerSpec layer_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("layer must be an object", where);
  if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError("missing string 'kind'", where + ".kind");
  const std::string kind = j["kind"].get<std::string>();
  nn::LayerType type;
  try {
    type = nn::parse_layer_type(kind);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), where + ".kind");
  }
  nn::LayerSpec layer;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ConfigError("must be a string", where + ".name");
    layer.name = j["name"].get<std::string>();
  }
  switch (type) {
    case nn::LayerType::dense:
      reject_unknown(j, {"kind", "name", "in_dim", "out_dim"}, where);
      layer.op = nn::DenseLayer{get_int(j, "in_dim", where), get_int(j, "out_dim", where)};
      break;
    case nn::LayerType::conv2d: {
      reject_unknown(j, {"kind", "name", "in_ch", "out_ch", "kernel", "stride", "padding"}, where);
      const int k = get_int(j, "kernel", where, 3);
      layer.op = nn::Conv2dLayer{get_int(j, "in_ch", where), get_int(j, "out_ch", where), k,
                                 get_int(j, "stride", where, 1), get_int(j, "padding", where, (k - 1) / 2)};
      break;
    }
    case nn::LayerType::maxpool2d:
      reject_unknown(j, {"kind", "name", "kernel", "stride"}, where);
      layer.op = nn::MaxPool2dLayer{get_int(j, "kernel", where, 2), get_int(j, "stride", where, 2)};
      break;
    case nn::LayerType::residual_block:
      reject_unknown(j, {"kind", "name", "in_ch", "out_ch", "stride"}, where);
      layer.op = nn::ResidualBlockLayer{get_int(j, "in_ch", where), get_int(j, "out_ch", where),
                                        get_int(j, "stride", where, 1)};
      break;
    case nn::LayerType::relu:
      reject_unknown(j, {"kind", "name"}, where);
      layer.op = nn::ReluLayer{};
      break;
    case nn::LayerType::global_avg_pool:
      reject_unknown(j, {"kind", "name"}, where);
      layer.op = nn::GlobalAvgPoolLayer{};
      break;
    case nn::LayerType::flatten:
      reject_unknown(j, {"kind", "name"}, where);
      layer.op = nn::FlattenLayer{};
      break;
  }
  return layer;
}

json layer_to_json(const nn::LayerSpec& layer) {
  json j = {{"kind", nn::layer_type_name(layer.type())}, {"name", layer.name}};
  std::visit(
      [&](const auto& op) {
        using Op = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<Op, nn::DenseLayer>) {
          j["in_dim"] = op.in_dim;
          j["out_dim"] = op.out_dim;
        } else if constexpr (std::is_same_v<Op, nn::Conv2dLayer>) {
          j["in_ch"] = op.in_ch;
          j["out_ch"] = op.out_ch;
          j["kernel"] = op.kernel;
          j["stride"] = op.stride;
          j["padding"] = op.padding;
        } else if constexpr (std::is_same_v<Op, nn::MaxPool2dLayer>) {
          j["kernel"] = op.kernel;
          j["stride"] = op.stride;
        } else if constexpr (std::is_same_v<Op, nn::ResidualBlockLayer>) {
          j["in_ch"] = op.in_ch;
          j["out_ch"] = op.out_ch;
          j["stride"] = op.stride;
        }
      },
      layer.op);
  return j;
}

}  // namespace

nn::ModelSpec model_spec_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("model must be an object", where);
  reject_unknown(j, {"input_shape", "num_classes", "layers"}, where);
  nn::ModelSpec spec;
  const auto shape = j.find("input_shape");
  if (shape == j.end()) throw ConfigError("missing required key", where + ".input_shape");
  if (!shape->is_array()) throw ConfigError("must be an array of positive integers", where + ".input_shape");
  for (const auto& d : *shape) {
    if (!d.is_number_integer() || d.get<long long>() < 1)
      throw ConfigError("must be an array of positive integers", where + ".input_shape");
    spec.input_shape.push_back(d.get<std::size_t>());
  }
  spec.num_classes = get_int(j, "num_classes", where, 0);
  const auto layers = j.find("layers");
  if (layers == j.end() || !layers->is_array() || layers->empty())
    throw ConfigError("must be a non-empty array", where + ".layers");
  for (std::size_t i = 0; i < layers->size(); ++i)
    spec.layers.push_back(layer_from_json((*layers)[i], where + ".layers[" + std::to_string(i) + "]"));
  nn::assign_default_names(spec);
  return spec;
}

json model_spec_to_json(const nn::ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
  return {{"input_shape", spec.input_shape}, {"num_classes", spec.num_classes}, {"layers", layers}};
}

}  // namespace feddiv::arch
