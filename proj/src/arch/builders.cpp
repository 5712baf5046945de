#include <algorithm>
#include <cmath>

#include "feddiv/arch/arch.hpp"

namespace feddiv::arch {

const char* schedule_name(ChannelSchedule s) {
  switch (s) {
    case ChannelSchedule::normal:
      return "normal";
    case ChannelSchedule::mean:
      return "mean";
    case ChannelSchedule::reversed:
      return "reversed";
  }
  return "unknown";
}

ChannelSchedule parse_schedule(const std::string& name) {
  for (auto s : {ChannelSchedule::normal, ChannelSchedule::mean, ChannelSchedule::reversed})
    if (name == schedule_name(s)) return s;
  throw ValidationError("unknown channel schedule '" + name + "'");
}

std::vector<int> schedule_channels(ChannelSchedule s) {
  switch (s) {
    case ChannelSchedule::normal:
      return {32, 64, 128, 256};
    case ChannelSchedule::mean:
      return {120, 120, 120, 120};
    case ChannelSchedule::reversed:
      return {256, 128, 64, 32};
  }
  return {};
}

int scaled_channels(int base, double width_multiplier) {
  return std::max(1, static_cast<int>(std::lround(base * width_multiplier)));
}

void validate(const CnnBuildConfig& c) {
  if (c.depth_blocks < 1) throw ValidationError("must be >= 1", "depth_blocks");
  if (!(c.width_multiplier > 0.0) || !std::isfinite(c.width_multiplier))
    throw ValidationError("must be finite and > 0", "width_multiplier");
  if (c.stem_kernel != 3 && c.stem_kernel != 7) throw ValidationError("must be 3 or 7", "stem_kernel");
  if (c.num_classes < 1) throw ValidationError("must be >= 1", "num_classes");
  if (c.input_shape.size() != 3) throw ValidationError("must be (C, H, W)", "input_shape");
  for (std::size_t d : c.input_shape)
    if (d == 0) throw ValidationError("dimensions must be positive", "input_shape");
  if (c.use_stem_maxpool) {
    const std::size_t side = std::min(c.input_shape[1], c.input_shape[2]);
    const std::size_t after_stem = c.stem_kernel == 7 ? (side - 1) / 2 + 1 : side;
    if (after_stem < 3)
      throw ValidationError("input " + shape_to_string(c.input_shape) + " is too small for the stem max-pool",
                            "input_shape");
  }
}

nn::ModelSpec build_cnn(const CnnBuildConfig& c) {
  validate(c);
  const auto base = schedule_channels(c.channel_schedule);
  auto stage_channels = [&](int k) { return scaled_channels(base[std::min<std::size_t>(k, base.size() - 1)], c.width_multiplier); };

  nn::ModelSpec spec;
  spec.input_shape = c.input_shape;
  spec.num_classes = c.num_classes;
  const int in_ch = static_cast<int>(c.input_shape[0]);
  int ch = stage_channels(0);
  if (c.stem_kernel == 7)
    spec.layers.push_back({"stem", nn::Conv2dLayer{in_ch, ch, 7, 2, 3}});
  else
    spec.layers.push_back({"stem", nn::Conv2dLayer{in_ch, ch, 3, 1, 1}});
  spec.layers.push_back({"stem_relu", nn::ReluLayer{}});
  if (c.use_stem_maxpool) spec.layers.push_back({"stem_pool", nn::MaxPool2dLayer{3, 2}});

  for (int k = 0; k < c.depth_blocks; ++k) {
    const int out = stage_channels(k);
    const int stride = k == 0 ? 1 : 2;
    const std::string prefix = "s" + std::to_string(k + 1) + "_";
    if (c.residual) {
      spec.layers.push_back({prefix + "res", nn::ResidualBlockLayer{ch, out, stride}});
    } else {
      spec.layers.push_back({prefix + "conv1", nn::Conv2dLayer{ch, out, 3, stride, 1}});
      spec.layers.push_back({prefix + "relu1", nn::ReluLayer{}});
      spec.layers.push_back({prefix + "conv2", nn::Conv2dLayer{out, out, 3, 1, 1}});
      spec.layers.push_back({prefix + "relu2", nn::ReluLayer{}});
    }
    ch = out;
  }
  spec.layers.push_back({"gap", nn::GlobalAvgPoolLayer{}});
  spec.layers.push_back({"fc", nn::DenseLayer{ch, c.num_classes}});
  nn::validate(spec);
  return spec;
}

std::pair<nn::ModelSpec, nn::ModelSpec> build_probe_cnns() {
  auto make = [](const std::vector<int>& widths) {
    nn::ModelSpec spec;
    spec.input_shape = {1, 28, 28};
    spec.num_classes = 10;
    int ch = 1;
    std::size_t side = 28;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::string n = std::to_string(i + 1);
      spec.layers.push_back({"conv" + n, nn::Conv2dLayer::same(ch, widths[i], 3)});
      spec.layers.push_back({"relu" + n, nn::ReluLayer{}});
      if (i % 2 == 1 && i + 1 < 8) {
        spec.layers.push_back({"pool" + n, nn::MaxPool2dLayer{2, 2}});
        side /= 2;
      }
      ch = widths[i];
    }
    spec.layers.push_back({"flatten", nn::FlattenLayer{}});
    spec.layers.push_back({"fc", nn::DenseLayer{ch * static_cast<int>(side * side), 10}});
    nn::validate(spec);
    return spec;
  };
  return {make({8, 8, 16, 16}), make({8, 8, 16, 16, 16, 16, 16, 16})};
}

}  // namespace feddiv::arch
