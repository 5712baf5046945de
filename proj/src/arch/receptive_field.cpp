#include <iomanip>
#include <sstream>

#include "feddiv/arch/arch.hpp"

namespace feddiv::arch {
namespace {

bool terminates_chain(nn::LayerType t) {
  return t == nn::LayerType::flatten || t == nn::LayerType::dense || t == nn::LayerType::global_avg_pool;
}

std::pair<int, int> kernel_stride(const nn::LayerSpec& layer) {
  switch (layer.type()) {
    case nn::LayerType::conv2d: {
      const auto& c = std::get<nn::Conv2dLayer>(layer.op);
      return {c.kernel, c.stride};
    }
    case nn::LayerType::maxpool2d: {
      const auto& p = std::get<nn::MaxPool2dLayer>(layer.op);
      return {p.kernel, p.stride};
    }
    case nn::LayerType::residual_block: {
      const auto& r = std::get<nn::ResidualBlockLayer>(layer.op);
      return {3 + 2 * r.stride, r.stride};
    }
    default:
      return {1, 1};
  }
}

}  // namespace

std::vector<long long> ReceptiveFieldReport::values() const {
  std::vector<long long> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.receptive_field);
  return out;
}

ReceptiveFieldReport receptive_field(const nn::ModelSpec& spec) {
  nn::validate_structure(spec);
  if (spec.input_shape.size() != 3)
    throw ValidationError("receptive field needs a (C, H, W) input, got " + shape_to_string(spec.input_shape));
  ReceptiveFieldReport report;
  long long rf = 1, jump = 1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    if (terminates_chain(layer.type())) {
      report.terminated_by = static_cast<int>(i);
      break;
    }
    const auto [k, s] = kernel_stride(layer);
    rf += static_cast<long long>(k - 1) * jump;
    jump *= s;
    report.rows.push_back({static_cast<int>(i), layer.name, nn::layer_type_name(layer.type()), k, s, jump, rf});
  }
  return report;
}

long long receptive_field_at(const nn::ModelSpec& spec, int layer_index) {
  const auto report = receptive_field(spec);
  if (layer_index < 0 || layer_index >= static_cast<int>(spec.layers.size()))
    throw ValidationError("layer index " + std::to_string(layer_index) + " out of range");
  if (report.terminated_by && layer_index >= *report.terminated_by) {
    const auto& t = spec.layers[static_cast<std::size_t>(*report.terminated_by)];
    throw ValidationError("layer " + std::to_string(layer_index) + " lies past the spatial chain, which ends at " +
                          nn::layer_type_name(t.type()) + " layer '" + t.name + "'");
  }
  return report.rows[static_cast<std::size_t>(layer_index)].receptive_field;
}

nlohmann::json to_json(const ReceptiveFieldReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& r : report.rows)
    layers.push_back({{"index", r.layer_index},
                      {"name", r.name},
                      {"kind", r.kind},
                      {"kernel", r.kernel},
                      {"stride", r.stride},
                      {"cumulative_stride", r.cumulative_stride},
                      {"receptive_field", r.receptive_field}});
  nlohmann::json out = {{"layers", layers}, {"l", report.values()}};
  out["terminated_by"] = report.terminated_by ? nlohmann::json(*report.terminated_by) : nlohmann::json(nullptr);
  return out;
}

std::string render_table(const ReceptiveFieldReport& report) {
  std::size_t name_w = 4, kind_w = 4;
  for (const auto& r : report.rows) {
    name_w = std::max(name_w, r.name.size());
    kind_w = std::max(kind_w, r.kind.size());
  }
  std::ostringstream os;
  auto line = [&](const std::string& idx, const std::string& name, const std::string& kind, const std::string& k,
                  const std::string& s, const std::string& cum, const std::string& l) {
    os << std::right << std::setw(5) << idx << "  " << std::left << std::setw(static_cast<int>(name_w)) << name
       << "  " << std::setw(static_cast<int>(kind_w)) << kind << "  " << std::right << std::setw(3) << k << "  "
       << std::setw(3) << s << "  " << std::setw(8) << cum << "  " << std::setw(6) << l << '\n';
  };
  line("index", "name", "kind", "K", "s", "prod s", "l");
  line("", "input", "", "", "", "1", "1");
  for (const auto& r : report.rows)
    line(std::to_string(r.layer_index), r.name, r.kind, std::to_string(r.kernel), std::to_string(r.stride),
         std::to_string(r.cumulative_stride), std::to_string(r.receptive_field));
  return os.str();
}

}  // namespace feddiv::arch
