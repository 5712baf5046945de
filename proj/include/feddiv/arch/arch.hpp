#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "feddiv/nn/model_spec.hpp"

namespace feddiv::arch {

struct RfRow {
  int layer_index = 0;
  std::string name;
  std::string kind;
  int kernel = 1;
  int stride = 1;
  long long cumulative_stride = 1;  // product of strides up to and including this layer
  long long receptive_field = 1;
};

// Receptive field per spatial layer: l_k = l_{k-1} + (K_k - 1) * prod_{i<k} s_i
// with l_0 = 1. Element-wise layers have K = 1, s = 1. A residual block counts
// as one layer with K = 3 + 2s and stride s (its two 3x3 convolutions). The
// chain ends at the first flatten, dense or global_avg_pool layer.
struct ReceptiveFieldReport {
  std::vector<RfRow> rows;
  // Index of the layer that ended the spatial chain, if any.
  std::optional<int> terminated_by;

  std::vector<long long> values() const;
};

ReceptiveFieldReport receptive_field(const nn::ModelSpec& spec);

// Receptive field after `layer_index`. Throws ValidationError naming the
// terminating layer if the index lies at or past it.
long long receptive_field_at(const nn::ModelSpec& spec, int layer_index);

nlohmann::json to_json(const ReceptiveFieldReport& report);
std::string render_table(const ReceptiveFieldReport& report);

enum class ChannelSchedule { normal, mean, reversed };

const char* schedule_name(ChannelSchedule s);
ChannelSchedule parse_schedule(const std::string& name);

// Base channels per stage; stages past the fourth reuse the last entry.
std::vector<int> schedule_channels(ChannelSchedule s);

struct CnnBuildConfig {
  int depth_blocks = 2;
  double width_multiplier = 1.0;
  int stem_kernel = 3;  // 7 (stride 2) or 3 (stride 1)
  bool use_stem_maxpool = false;
  ChannelSchedule channel_schedule = ChannelSchedule::normal;
  bool residual = false;
  int num_classes = 10;
  Shape input_shape{1, 28, 28};
};

void validate(const CnnBuildConfig& config);

// stem conv + relu, optional 3x3/2 max-pool, depth_blocks stages of two 3x3
// convolutions (plain with ReLUs, or one residual block), global average
// pool, dense classifier. Stage k > 0 halves the resolution in its first
// convolution. Channels are round(base * width_multiplier), at least 1.
nn::ModelSpec build_cnn(const CnnBuildConfig& config);

int scaled_channels(int base, double width_multiplier);

// MNIST-shaped probes with 4 and 8 3x3 convolutions (8, 8, then 16 channels),
// a 2x2 max-pool after every second convolution except the eighth, and a
// flatten + dense head. The first four convolutions coincide between the two.
std::pair<nn::ModelSpec, nn::ModelSpec> build_probe_cnns();

// Model description as JSON:
//   {"input_shape": [1, 28, 28], "num_classes": 10,
//    "layers": [{"kind": "conv2d", "in_ch": 1, "out_ch": 8, "kernel": 3}, ...]}
// Layer names default to "<index>_<kind>". Convolution padding defaults to
// (kernel - 1) / 2, stride to 1. Unknown keys raise ConfigError with a path
// below `where`. num_classes may be omitted when the caller does not need it
// (0 then).
nn::ModelSpec model_spec_from_json(const nlohmann::json& j, const std::string& where = "model");
nlohmann::json model_spec_to_json(const nn::ModelSpec& spec);

}  // namespace feddiv::arch
