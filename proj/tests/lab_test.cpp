#include <gtest/gtest.h>

#include <cmath>

#include "feddiv/data/synthetic.hpp"
#include "feddiv/data/transforms.hpp"
#include "feddiv/lab/lab.hpp"
#include "feddiv/rng.hpp"
#include "feddiv/stats.hpp"

namespace feddiv::lab {
namespace {

nn::ModelSpec tiny_cnn() {
  return {{1, 6, 6},
          {{"conv1", nn::Conv2dLayer::same(1, 2, 3)},
           {"relu1", nn::ReluLayer{}},
           {"conv2", nn::Conv2dLayer::same(2, 3, 3)},
           {"relu2", nn::ReluLayer{}},
           {"gap", nn::GlobalAvgPoolLayer{}},
           {"fc", nn::DenseLayer{3, 3}}},
          3};
}

nn::ModelSpec linear_mlp() {
  return {{4}, {{"fc1", nn::DenseLayer{4, 5}}, {"fc2", nn::DenseLayer{5, 3}}}, 3};
}

data::Dataset tiny_data(std::size_t per_class, std::uint64_t seed) {
  data::SyntheticSpec s;
  s.class_count = 3;
  s.image_shape = {1, 6, 6};
  s.samples_per_class = per_class;
  s.noise_std = 0.2;
  return data::generate_synthetic(s, seed);
}

Tensor image_of(const data::Dataset& ds, std::size_t i) {
  Tensor out(ds.image_shape());
  std::copy_n(ds.images.data() + i * ds.image_size(), ds.image_size(), out.data());
  return out;
}

// Two-pass population variance over explicitly stored per-sample gradients.
std::vector<double> oracle_divergence(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                      const std::vector<Tensor>& images, const std::vector<int>& labels) {
  std::vector<std::vector<std::vector<double>>> grads;  // sample, layer, value
  const auto layers = nn::parameterized_layers(spec);
  for (std::size_t s = 0; s < images.size(); ++s) {
    Shape shape{1};
    shape.insert(shape.end(), images[s].shape().begin(), images[s].shape().end());
    const int label[1] = {labels[s]};
    const auto lg = nn::loss_and_grad(spec, params, images[s].reshaped(shape), std::span<const int>(label));
    std::vector<std::vector<double>> per_layer;
    for (int l : layers) per_layer.push_back(nn::flatten_layer_params(lg.grads, l));
    grads.push_back(per_layer);
  }
  std::vector<double> out;
  const double n = static_cast<double>(images.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t d = grads[0][l].size();
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& g : grads) mean += g[l][j];
      mean /= n;
      double var = 0.0;
      for (const auto& g : grads) var += (g[l][j] - mean) * (g[l][j] - mean);
      total += var / n;
    }
    out.push_back(std::sqrt(total / static_cast<double>(d)));
  }
  return out;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double rel) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], rel * std::abs(b[i])) << "layer " << i;
}

TEST(NoiseProbe, ZeroSigmaGivesZeroDivergence) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 1);
  const auto ds = tiny_data(2, 0);
  const auto p = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.0, 20, 3);
  for (const auto& l : p.layers) EXPECT_EQ(l.divergence, 0.0);
}

TEST(NoiseProbe, MatchesStoredGradientOracle) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 2);
  const auto ds = tiny_data(2, 0);
  const Tensor base = image_of(ds, 1);
  const std::size_t n = 150;  // spans several accumulation chunks
  std::vector<Tensor> images;
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(9, s));
    images.push_back(data::add_gaussian_noise(base, 0.3, rng));
  }
  const auto p = gradient_divergence_noise(spec, params, base, 1, 0.3, n, 9);
  expect_close(p.values(), oracle_divergence(spec, params, images, std::vector<int>(n, 1)), 1e-9);
  EXPECT_EQ(p.probe, ProbeKind::gaussian_noise);
  EXPECT_EQ(p.sigma, 0.3);
  EXPECT_EQ(p.seed, 9u);
}

TEST(NoiseProbe, DoublingLossScaleDoublesDivergenceExactly) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 3);
  const auto ds = tiny_data(2, 0);
  const auto a = gradient_divergence_noise(spec, params, image_of(ds, 2), 2, 0.1, 40, 5, 1.0);
  const auto b = gradient_divergence_noise(spec, params, image_of(ds, 2), 2, 0.1, 40, 5, 2.0);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(b.layers[l].divergence, 2.0 * a.layers[l].divergence);
}

TEST(NoiseProbe, OneEntryPerParameterizedLayerInOrder) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 4);
  const auto ds = tiny_data(2, 0);
  const auto p = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.1, 10, 0);
  ASSERT_EQ(p.layers.size(), 3u);
  const int expected[] = {0, 2, 5};
  const char* names[] = {"conv1", "conv2", "fc"};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.layers[i].layer_index, expected[i]);
    EXPECT_EQ(p.layers[i].layer_name, names[i]);
    EXPECT_EQ(p.layers[i].sample_count, 10u);
    EXPECT_GE(p.layers[i].divergence, 0.0);
  }
}

TEST(NoiseProbe, DeterministicAndIndependentOfWorkers) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 5);
  const auto ds = tiny_data(2, 0);
  const auto a = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.2, 100, 7, 1.0, 1);
  const auto b = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.2, 100, 7, 1.0, 1);
  const auto c = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.2, 100, 7, 1.0, 3);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.values(), c.values());
  const auto d = gradient_divergence_noise(spec, params, image_of(ds, 0), 0, 0.2, 100, 8, 1.0, 1);
  EXPECT_NE(a.values(), d.values());
}

TEST(NoiseProbe, RejectsInvalidArguments) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 5);
  const auto ds = tiny_data(2, 0);
  const Tensor img = image_of(ds, 0);
  EXPECT_THROW(gradient_divergence_noise(spec, params, img, 0, 0.1, 1, 0), ValidationError);
  EXPECT_THROW(gradient_divergence_noise(spec, params, img, 0, -0.1, 10, 0), ValidationError);
  EXPECT_THROW(gradient_divergence_noise(spec, params, img, 3, 0.1, 10, 0), ValidationError);
  EXPECT_THROW(gradient_divergence_noise(spec, params, Tensor({1, 5, 5}), 0, 0.1, 10, 0), ShapeError);
}

TEST(NoiseProbe, LinearNetworkDivergenceScalesWithSigma) {
  const auto spec = linear_mlp();
  const auto params = nn::init_params<double>(spec, 6);
  Tensor base({4}, std::vector<double>{0.2, -0.4, 0.7, 0.1});
  const double sigma = 1e-4;
  for (double k : {2.0, 5.0}) {
    const auto a = gradient_divergence_noise(spec, params, base, 1, sigma, 200, 11);
    const auto b = gradient_divergence_noise(spec, params, base, 1, k * sigma, 200, 11);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
      EXPECT_NEAR(b.layers[l].divergence / a.layers[l].divergence, k, 1e-3 * k);
  }
}

TEST(ClassProbe, MatchesStoredGradientOracle) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 7);
  const auto ds = tiny_data(6, 1);
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] == 1) images.push_back(image_of(ds, i));
  const auto p = gradient_divergence_class(spec, params, ds, 1);
  expect_close(p.values(), oracle_divergence(spec, params, images, std::vector<int>(images.size(), 1)), 1e-9);
  EXPECT_EQ(p.probe, ProbeKind::same_class);
  for (const auto& l : p.layers) EXPECT_EQ(l.sample_count, images.size());
}

TEST(ClassProbe, IdenticalImagesGiveZero) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 8);
  auto ds = tiny_data(2, 0);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] == 2) members.push_back(i);
  ASSERT_EQ(members.size(), 2u);
  std::copy_n(ds.images.data() + members[0] * ds.image_size(), ds.image_size(),
              ds.images.data() + members[1] * ds.image_size());
  const auto p = gradient_divergence_class(spec, params, ds, 2);
  for (const auto& l : p.layers) EXPECT_EQ(l.divergence, 0.0);
}

TEST(ClassProbe, RepeatedRunsAreIdentical) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 9);
  const auto ds = tiny_data(30, 2);
  const auto a = gradient_divergence_class(spec, params, ds, 0, 1.0, 1);
  const auto b = gradient_divergence_class(spec, params, ds, 0, 1.0, 1);
  const auto c = gradient_divergence_class(spec, params, ds, 0, 1.0, 4);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.values(), c.values());
}

TEST(ClassProbe, RejectsEmptyOrSingletonClass) {
  const auto spec = tiny_cnn();
  const auto params = nn::init_params<double>(spec, 9);
  auto ds = tiny_data(2, 2);
  EXPECT_THROW(gradient_divergence_class(spec, params, ds, 7), ValidationError);
  const auto one = data::subset(ds, std::vector<std::size_t>{0, 2, 3});
  ASSERT_EQ(one.labels[0], 0);
  EXPECT_THROW(gradient_divergence_class(spec, params, one, 0), ValidationError);
}

LayerDivergenceProfile profile_of(std::vector<double> values) {
  LayerDivergenceProfile p;
  for (std::size_t i = 0; i < values.size(); ++i)
    p.layers.push_back({static_cast<int>(2 * i), "l" + std::to_string(i), values[i], 10});
  return p;
}

TEST(Reports, LogBandsTrackMinMeanMax) {
  const auto bands = log_bands({profile_of({1.0, 4.0}), profile_of({2.0, 4.0}), profile_of({4.0, 4.0})});
  ASSERT_EQ(bands.size(), 2u);
  EXPECT_EQ(bands[0].layer_index, 0);
  EXPECT_EQ(bands[1].layer_index, 2);
  EXPECT_DOUBLE_EQ(bands[0].log_min, 0.0);
  EXPECT_DOUBLE_EQ(bands[0].log_max, std::log(4.0));
  EXPECT_NEAR(bands[0].log_mean, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(bands[1].log_min, bands[1].log_max);
  EXPECT_THROW(log_bands({}), ValidationError);
  EXPECT_THROW(log_bands({profile_of({1.0}), profile_of({1.0, 2.0})}), ValidationError);
}

TEST(Reports, DepthTrendIsRankCorrelation) {
  EXPECT_DOUBLE_EQ(depth_trend(profile_of({5.0, 3.0, 2.0, 1.0})), -1.0);
  EXPECT_DOUBLE_EQ(depth_trend(profile_of({1.0, 3.0, 9.0})), 1.0);
  // ranks of (2, 1, 4, 3) against (1, 2, 3, 4): rho = 1 - 6 * 4 / (4 * 15)
  EXPECT_NEAR(depth_trend(profile_of({2.0, 1.0, 4.0, 3.0})), 0.6, 1e-12);
  EXPECT_EQ(depth_trend(profile_of({2.0, 2.0, 2.0})), 0.0);
}

TEST(Stats, AverageRanksShareTies) {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
  const auto r = average_ranks(v);
  EXPECT_EQ(r, (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
}

TEST(Stats, SpearmanMatchesPearsonOfRanks) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(7), y(7);
    for (auto& v : x) v = static_cast<double>(rng.uniform_index(4));
    for (auto& v : y) v = rng.uniform();
    const auto rx = average_ranks(x), ry = average_ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 7; ++i) mx += rx[i] / 7, my += ry[i] / 7;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < 7; ++i) {
      sxy += (rx[i] - mx) * (ry[i] - my);
      sxx += (rx[i] - mx) * (rx[i] - mx);
      syy += (ry[i] - my) * (ry[i] - my);
    }
    const double expected = sxx == 0 ? 0.0 : sxy / std::sqrt(sxx * syy);
    EXPECT_NEAR(spearman(x, y), expected, 1e-12);
  }
}

TEST(Stats, SpearmanRejectsMismatchedInput) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_THROW(spearman(a, b), ValidationError);
  EXPECT_THROW(spearman(std::span<const double>(a.data(), 1), std::span<const double>(a.data(), 1)),
               ValidationError);
}

TEST(Accumulation, EmitsOneProfilePerSeedAndRecomputableTrends) {
  const auto spec = tiny_cnn();
  nn::ModelSpec shallow{{1, 6, 6},
                        {{"conv1", nn::Conv2dLayer::same(1, 2, 3)},
                         {"relu1", nn::ReluLayer{}},
                         {"gap", nn::GlobalAvgPoolLayer{}},
                         {"fc", nn::DenseLayer{2, 3}}},
                        3};
  const auto ds = tiny_data(8, 3);
  AccumulationSettings s;
  s.n_samples = 20;
  s.seeds = {1, 2};
  s.pretrain_epochs = 1;
  s.probe_class = 1;
  const auto report = run_accumulation_experiment(spec, shallow, ds, s);
  for (const auto* m : {&report.deep, &report.shallow}) {
    ASSERT_EQ(m->noise.size(), 2u);
    ASSERT_EQ(m->same_class.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(m->noise_spearman[i], depth_trend(m->noise[i]));
      EXPECT_EQ(m->class_spearman[i], depth_trend(m->same_class[i]));
      EXPECT_EQ(m->noise[i].sigma, 0.1);
      EXPECT_EQ(m->same_class[i].layers.front().sample_count, 8u);
    }
  }
  EXPECT_EQ(report.deep.model, "deep");
  EXPECT_EQ(report.deep.noise[0].layers.size(), 3u);
  EXPECT_EQ(report.shallow.noise[0].layers.size(), 2u);
  EXPECT_EQ(report.deep.noise[0].seed, report.shallow.noise[0].seed);
  const auto again = run_accumulation_experiment(spec, shallow, ds, s);
  EXPECT_EQ(again.deep.noise[1].values(), report.deep.noise[1].values());
}

Theorem1Config small_config() {
  Theorem1Config c;
  c.in_width = 8;
  c.hidden_width = 8;
  c.out_width = 8;
  c.n_samples = 2000;
  c.seed = 3;
  return c;
}

TEST(Theorem, NoInputNoiseMeansNoSecondTerm) {
  auto c = small_config();
  c.noise_std_input = 0.0;
  for (auto act : {Activation::linear, Activation::relu}) {
    c.activation = act;
    const auto r = theorem1_decomposition_check(c);
    EXPECT_EQ(r.mean_t2_sq, 0.0);
    EXPECT_EQ(r.mean_cross, 0.0);
    EXPECT_NEAR(r.mean_eps_prev_sq, r.mean_t1_sq, 1e-12 * r.mean_t1_sq);
  }
}

TEST(Theorem, NoUpstreamNoiseMeansNoFirstTerm) {
  auto c = small_config();
  c.noise_std_upstream = 0.0;
  c.weight_mode = WeightMode::random;
  c.activation = Activation::relu;
  const auto r = theorem1_decomposition_check(c);
  EXPECT_EQ(r.mean_t1_sq, 0.0);
  EXPECT_EQ(r.mean_eps_sq, 0.0);
  EXPECT_EQ(r.mean_eps_prev_sq, r.mean_t2_sq);
  EXPECT_GT(r.mean_t2_sq, 0.0);
}

TEST(Theorem, IdentityHoldsPerSampleInEveryMode) {
  for (auto mode : {WeightMode::random, WeightMode::orthogonal})
    for (auto act : {Activation::relu, Activation::linear}) {
      auto c = small_config();
      c.weight_mode = mode;
      c.activation = act;
      c.out_width = 5;
      c.in_width = 11;
      const auto r = theorem1_decomposition_check(c);
      EXPECT_TRUE(r.identity_holds) << r.max_identity_rel_error;
      EXPECT_TRUE(r.additive);
    }
}

TEST(Theorem, OrthogonalLinearBackwardMapIsIsometry) {
  const auto r = theorem1_decomposition_check(small_config());
  ASSERT_TRUE(r.isometric);
  EXPECT_NEAR(r.mean_t1_sq, r.mean_eps_sq, 1e-12 * r.mean_eps_sq);
}

TEST(Theorem, GrowthEqualsSecondTermForIsometricSlice) {
  Theorem1Config c;  // 32 wide, 10^4 samples
  const auto r = theorem1_decomposition_check(c);
  EXPECT_TRUE(r.identity_holds);
  EXPECT_TRUE(r.cross_vanishes) << r.mean_cross << " vs stderr " << r.cross_stderr;
  EXPECT_TRUE(r.additive);
  EXPECT_TRUE(r.growth_matches_t2);
  EXPECT_TRUE(r.no_smaller);
  EXPECT_GT(r.mean_t2_sq, 0.0);
  // Monte-Carlo oracle on the per-sample means themselves.
  EXPECT_NEAR(r.mean_eps_prev_sq - r.mean_eps_sq, r.mean_t2_sq, 0.02 * r.mean_t2_sq);
}

TEST(Theorem, NonIsometricConfigurationsSkipGrowthVerdict) {
  auto c = small_config();
  c.activation = Activation::relu;
  const auto r = theorem1_decomposition_check(c);
  EXPECT_FALSE(r.isometric);
  EXPECT_FALSE(r.growth_matches_t2);
  EXPECT_FALSE(r.no_smaller);
}

TEST(Theorem, ResultIndependentOfWorkers) {
  auto c = small_config();
  const auto a = theorem1_decomposition_check(c);
  c.workers = 3;
  const auto b = theorem1_decomposition_check(c);
  EXPECT_EQ(a.mean_eps_prev_sq, b.mean_eps_prev_sq);
  EXPECT_EQ(a.mean_cross, b.mean_cross);
}

TEST(Theorem, RejectsDegenerateConfigurations) {
  auto c = small_config();
  c.hidden_width = 0;
  EXPECT_THROW(theorem1_decomposition_check(c), ValidationError);
  c = small_config();
  c.n_samples = 999;
  EXPECT_THROW(theorem1_decomposition_check(c), ValidationError);
  c = small_config();
  c.noise_std_input = -1;
  EXPECT_THROW(theorem1_decomposition_check(c), ValidationError);
  EXPECT_THROW(parse_weight_mode("unitary"), ValidationError);
  EXPECT_EQ(parse_activation(activation_name(Activation::relu)), Activation::relu);
}

TEST(Theorem, IsometricChainAccumulatesTowardInput) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto profile = isometric_chain_profile(6, 16, 2000, 0.1, 0.1, seed);
    ASSERT_EQ(profile.size(), 6u);
    for (std::size_t k = 0; k + 1 < profile.size(); ++k)
      EXPECT_GE(profile[k], 0.95 * profile[k + 1]) << "seed " << seed << " layer " << k;
    EXPECT_GT(profile.front(), profile.back());
  }
}

}  // namespace
}  // namespace feddiv::lab
