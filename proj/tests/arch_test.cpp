#include <gtest/gtest.h>

#include "feddiv/arch/arch.hpp"
#include "feddiv/nn/network.hpp"
#include "feddiv/rng.hpp"

namespace feddiv::arch {
namespace {

using nn::Conv2dLayer;
using nn::MaxPool2dLayer;

nn::ModelSpec chain(Shape input, std::vector<nn::LayerSpec> layers) {
  nn::ModelSpec spec{std::move(input), std::move(layers), 0};
  nn::assign_default_names(spec);
  return spec;
}

// Independent evaluation of the recursion from (K, s) pairs.
std::vector<long long> recursion(const std::vector<std::pair<int, int>>& ks) {
  std::vector<long long> out;
  long long l = 1, prod = 1;
  for (auto [k, s] : ks) {
    l = l + (k - 1) * prod;
    prod *= s;
    out.push_back(l);
  }
  return out;
}

TEST(ReceptiveFieldTest, TwoThreeByThreeConvs) {
  const auto spec = chain({1, 8, 8}, {{"", Conv2dLayer::same(1, 2, 3)}, {"", Conv2dLayer::same(2, 2, 3)}});
  EXPECT_EQ(receptive_field(spec).values(), (std::vector<long long>{3, 5}));
}

TEST(ReceptiveFieldTest, StemPoolConv) {
  const auto spec = chain({3, 32, 32}, {{"", Conv2dLayer{3, 4, 7, 2, 3}}, {"", MaxPool2dLayer{3, 2}},
                                        {"", Conv2dLayer::same(4, 4, 3)}});
  const auto report = receptive_field(spec);
  EXPECT_EQ(report.values(), (std::vector<long long>{7, 11, 19}));
  EXPECT_EQ(report.rows[2].cumulative_stride, 4);
}

TEST(ReceptiveFieldTest, SmallerStemKernelLowersEveryLayerByFour) {
  auto with_stem = [](int k) {
    return chain({1, 32, 32}, {{"", Conv2dLayer{1, 4, k, 2, (k - 1) / 2}},
                               {"", nn::ReluLayer{}},
                               {"", MaxPool2dLayer{3, 2}},
                               {"", Conv2dLayer::same(4, 4, 3)},
                               {"", Conv2dLayer{4, 4, 3, 2, 1}},
                               {"", nn::ResidualBlockLayer{4, 8, 2}}});
  };
  const auto big = receptive_field(with_stem(7)).values();
  const auto small = receptive_field(with_stem(3)).values();
  ASSERT_EQ(big.size(), small.size());
  for (std::size_t i = 0; i < big.size(); ++i) EXPECT_EQ(big[i] - small[i], 4);
}

TEST(ReceptiveFieldTest, ResidualBlockCountsBothConvolutions) {
  const auto spec = chain({2, 16, 16}, {{"", Conv2dLayer{2, 2, 3, 2, 1}}, {"", nn::ResidualBlockLayer{2, 4, 2}}});
  const auto report = receptive_field(spec);
  EXPECT_EQ(report.rows[1].kernel, 7);
  // conv1 of the block: 3 + 2*2 = 7, conv2 at jump 4: 7 + 2*4 = 15
  EXPECT_EQ(report.values(), (std::vector<long long>{3, 15}));
}

TEST(ReceptiveFieldTest, ChainStopsAtFlattenAndQueriesPastItFail) {
  const auto spec = chain({1, 6, 6}, {{"", Conv2dLayer::same(1, 2, 3)},
                                      {"", nn::FlattenLayer{}},
                                      {"", nn::DenseLayer{72, 3}}});
  const auto report = receptive_field(spec);
  EXPECT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.terminated_by, 1);
  EXPECT_EQ(receptive_field_at(spec, 0), 3);
  try {
    receptive_field_at(spec, 2);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("1_flatten"), std::string::npos);
  }
  EXPECT_THROW(receptive_field(chain({12}, {{"", nn::DenseLayer{12, 3}}})), ValidationError);
}

CnnBuildConfig draw_config(Rng& rng) {
  CnnBuildConfig c;
  c.depth_blocks = 1 + static_cast<int>(rng.uniform_index(4));
  c.width_multiplier = rng.uniform(0.01, 0.2);
  c.stem_kernel = rng.uniform() < 0.5 ? 3 : 7;
  c.use_stem_maxpool = rng.uniform() < 0.5;
  c.channel_schedule = static_cast<ChannelSchedule>(rng.uniform_index(3));
  c.residual = rng.uniform() < 0.5;
  c.num_classes = 2 + static_cast<int>(rng.uniform_index(5));
  c.input_shape = {1 + rng.uniform_index(3), 4 + rng.uniform_index(20), 4 + rng.uniform_index(20)};
  return c;
}

TEST(ReceptiveFieldTest, JsonAndTableOutput) {
  const auto spec = chain({1, 8, 8}, {{"a", Conv2dLayer::same(1, 2, 3)}, {"b", Conv2dLayer::same(2, 2, 3)}});
  const auto j = to_json(receptive_field(spec));
  EXPECT_EQ(j.at("l"), nlohmann::json({3, 5}));
  EXPECT_EQ(j.at("layers")[1].at("name"), "b");
  EXPECT_TRUE(j.at("terminated_by").is_null());
  const auto table = render_table(receptive_field(spec));
  EXPECT_NE(table.find("input"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

// Random configs; the few whose input is too small for the stem pool are
// redrawn.
CnnBuildConfig random_config(Rng& rng) {
  for (;;) {
    CnnBuildConfig c = draw_config(rng);
    try {
      validate(c);
      return c;
    } catch (const ValidationError&) {
    }
  }
}

TEST(ReceptiveFieldProperty, MonotoneAndMatchesRecursion) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto spec = build_cnn(random_config(rng));
    const auto report = receptive_field(spec);
    std::vector<std::pair<int, int>> ks;
    long long prev = 1;
    for (const auto& row : report.rows) {
      ASSERT_GE(row.receptive_field, prev);
      prev = row.receptive_field;
      ks.emplace_back(row.kernel, row.stride);
    }
    ASSERT_EQ(report.values(), recursion(ks));
  }
}

TEST(ReceptiveFieldProperty, ThreeByThreeStemIsSmallerEverywhere) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_config(rng);
    c.input_shape = {1, 32, 32};
    c.stem_kernel = 7;
    const auto big = receptive_field(build_cnn(c)).values();
    c.stem_kernel = 3;
    const auto small = receptive_field(build_cnn(c)).values();
    ASSERT_EQ(big.size(), small.size());
    for (std::size_t i = 0; i < big.size(); ++i) ASSERT_LT(small[i], big[i]);
  }
}

std::vector<int> conv_out_channels(const nn::ModelSpec& spec) {
  std::vector<int> out;
  for (const auto& l : spec.layers) {
    if (auto* c = std::get_if<Conv2dLayer>(&l.op)) out.push_back(c->out_ch);
    if (auto* r = std::get_if<nn::ResidualBlockLayer>(&l.op)) out.push_back(r->out_ch);
  }
  return out;
}

TEST(BuildCnnTest, SchedulesGiveDocumentedChannels) {
  CnnBuildConfig c;
  c.depth_blocks = 4;
  c.residual = true;
  c.input_shape = {3, 32, 32};
  EXPECT_EQ(conv_out_channels(build_cnn(c)), (std::vector<int>{32, 32, 64, 128, 256}));
  c.channel_schedule = ChannelSchedule::mean;
  EXPECT_EQ(conv_out_channels(build_cnn(c)), (std::vector<int>{120, 120, 120, 120, 120}));
  c.channel_schedule = ChannelSchedule::reversed;
  EXPECT_EQ(conv_out_channels(build_cnn(c)), (std::vector<int>{256, 256, 128, 64, 32}));
  c.depth_blocks = 6;
  EXPECT_EQ(conv_out_channels(build_cnn(c)).back(), 32);
}

TEST(BuildCnnTest, WidthMultiplierScalesAndRounds) {
  CnnBuildConfig c;
  c.depth_blocks = 3;
  const auto base = conv_out_channels(build_cnn(c));
  c.width_multiplier = 2.0;
  const auto wide = conv_out_channels(build_cnn(c));
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(wide[i], 2 * base[i]);
  c.width_multiplier = 0.001;
  for (int ch : conv_out_channels(build_cnn(c))) EXPECT_EQ(ch, 1);
  EXPECT_EQ(scaled_channels(32, 0.25), 8);
  EXPECT_EQ(scaled_channels(120, 0.1), 12);
}

TEST(BuildCnnTest, LayoutAndNaming) {
  CnnBuildConfig c;
  c.depth_blocks = 2;
  c.stem_kernel = 7;
  c.use_stem_maxpool = true;
  const auto spec = build_cnn(c);
  std::vector<std::string> names;
  for (const auto& l : spec.layers) names.push_back(l.name);
  EXPECT_EQ(names, (std::vector<std::string>{"stem", "stem_relu", "stem_pool", "s1_conv1", "s1_relu1", "s1_conv2",
                                             "s1_relu2", "s2_conv1", "s2_relu1", "s2_conv2", "s2_relu2", "gap", "fc"}));
  const auto& stem = std::get<Conv2dLayer>(spec.layers[0].op);
  EXPECT_EQ(stem.stride, 2);
  EXPECT_EQ(std::get<Conv2dLayer>(spec.layers[7].op).stride, 2);
  // 28 -> 14 (stem) -> 6 (pool) -> 6 -> 3
  EXPECT_EQ(nn::infer_shapes(spec)[10], (Shape{64, 3, 3}));
}

TEST(BuildCnnTest, InvalidConfigsAreRejected) {
  CnnBuildConfig c;
  c.stem_kernel = 5;
  EXPECT_THROW(build_cnn(c), ValidationError);
  c = {};
  c.depth_blocks = 0;
  EXPECT_THROW(build_cnn(c), ValidationError);
  c = {};
  c.width_multiplier = 0.0;
  EXPECT_THROW(build_cnn(c), ValidationError);
  c = {};
  c.stem_kernel = 7;
  c.use_stem_maxpool = true;
  c.input_shape = {1, 4, 9};
  EXPECT_THROW(build_cnn(c), ValidationError);
  c.input_shape = {1, 5, 9};
  EXPECT_NO_THROW(build_cnn(c));
  EXPECT_THROW(parse_schedule("inverted"), ValidationError);
}

TEST(BuildCnnProperty, EveryConfigValidatesAndRunsForward) {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const auto c = random_config(rng);
    const auto spec = build_cnn(c);
    ASSERT_NO_THROW(nn::validate(spec));
    const auto params = nn::init_params<double>(spec, 1);
    Shape shape{2};
    shape.insert(shape.end(), c.input_shape.begin(), c.input_shape.end());
    const auto logits = nn::forward(spec, params, Tensor(shape, 0.5));
    ASSERT_EQ(logits.shape(), (Shape{2, static_cast<std::size_t>(c.num_classes)}));
    ASSERT_TRUE(logits.all_finite());
  }
}

TEST(ProbeCnnTest, DepthsWidthsAndDeterminism) {
  const auto [shallow, deep] = build_probe_cnns();
  EXPECT_EQ(conv_out_channels(shallow), (std::vector<int>{8, 8, 16, 16}));
  EXPECT_EQ(conv_out_channels(deep), (std::vector<int>{8, 8, 16, 16, 16, 16, 16, 16}));
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(shallow.layers[i].name, deep.layers[i].name);
  }
  // 28 -> 14 -> 7 for the shallow model, down to 3 for the deep one
  EXPECT_EQ(std::get<nn::DenseLayer>(shallow.layers.back().op).in_dim, 16 * 7 * 7);
  EXPECT_EQ(std::get<nn::DenseLayer>(deep.layers.back().op).in_dim, 16 * 3 * 3);
  for (const auto& spec : {shallow, deep}) {
    EXPECT_EQ(spec.input_shape, (Shape{1, 28, 28}));
    const auto logits = nn::forward(spec, nn::init_params<double>(spec, 0), Tensor({3, 1, 28, 28}, 0.2));
    EXPECT_EQ(logits.shape(), (Shape{3, 10}));
  }
  const auto again = build_probe_cnns();
  EXPECT_EQ(model_spec_to_json(again.first), model_spec_to_json(shallow));
  EXPECT_EQ(model_spec_to_json(again.second), model_spec_to_json(deep));
}

TEST(SpecJsonTest, RoundTripsBuiltModels) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = build_cnn(random_config(rng));
    const auto j = model_spec_to_json(spec);
    EXPECT_EQ(model_spec_to_json(model_spec_from_json(j)), j);
  }
}

TEST(SpecJsonTest, DefaultsAndNames) {
  const auto spec = model_spec_from_json(nlohmann::json::parse(R"({
    "input_shape": [1, 8, 8],
    "layers": [{"kind": "conv2d", "in_ch": 1, "out_ch": 2, "kernel": 5},
               {"kind": "maxpool2d"}, {"kind": "relu", "name": "act"}]})"));
  EXPECT_EQ(spec.num_classes, 0);
  const auto& conv = std::get<Conv2dLayer>(spec.layers[0].op);
  EXPECT_EQ(conv.padding, 2);
  EXPECT_EQ(conv.stride, 1);
  EXPECT_EQ(spec.layers[0].name, "0_conv2d");
  EXPECT_EQ(std::get<MaxPool2dLayer>(spec.layers[1].op).kernel, 2);
  EXPECT_EQ(spec.layers[2].name, "act");
}

TEST(SpecJsonTest, ErrorsCarryFieldPaths) {
  auto path_of = [](const char* text) {
    try {
      model_spec_from_json(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return e.where();
    }
    return std::string("no error");
  };
  EXPECT_EQ(path_of(R"({"input_shape": [1, 4, 4], "layers": [{"kind": "relu", "sizee": 1}]})"),
            "model.layers[0].sizee");
  EXPECT_EQ(path_of(R"({"input_shape": [1, 4, 4], "layers": [{"kind": "conv3d"}]})"), "model.layers[0].kind");
  EXPECT_EQ(path_of(R"({"input_shape": [1, 4, 4], "layers": [{"kind": "dense", "in_dim": 3}]})"),
            "model.layers[0].out_dim");
  EXPECT_EQ(path_of(R"({"layers": []})"), "model.input_shape");
  EXPECT_EQ(path_of(R"({"input_shape": [1, 0], "layers": []})"), "model.input_shape");
  EXPECT_EQ(path_of(R"({"input_shape": [4], "layers": [], "extra": 1})"), "model.extra");
}

}  // namespace
}  // namespace feddiv::arch
