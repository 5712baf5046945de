#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "feddiv/data/dataset.hpp"
#include "feddiv/nn/network.hpp"

namespace feddiv::lab {

enum class ProbeKind { gaussian_noise, same_class };

const char* probe_kind_name(ProbeKind kind);

struct LayerDivergence {
  int layer_index = 0;
  std::string layer_name;
  double divergence = 0.0;
  std::size_t sample_count = 0;
};

// Spread of per-sample gradients: for each parameterized layer,
// sqrt(mean over parameters of the population variance across samples).
struct LayerDivergenceProfile {
  std::vector<LayerDivergence> layers;  // ascending layer index
  ProbeKind probe = ProbeKind::gaussian_noise;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  std::vector<double> values() const;
};

// Gradients of n_samples copies of base_image, each perturbed by unclamped
// N(0, sigma) noise from the stream derive_seed(seed, sample). The loss is
// multiplied by loss_scale before differentiation.
LayerDivergenceProfile gradient_divergence_noise(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                                 const Tensor& base_image, int label, double sigma,
                                                 std::size_t n_samples, std::uint64_t seed, double loss_scale = 1.0,
                                                 std::size_t workers = 1);

// Gradients of every image of class_id in the dataset.
LayerDivergenceProfile gradient_divergence_class(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                                 const data::Dataset& dataset, int class_id,
                                                 double loss_scale = 1.0, std::size_t workers = 1);

struct AccumulationSettings {
  double sigma = 0.1;
  std::size_t n_samples = 1000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int pretrain_epochs = 2;
  double pretrain_lr = 0.02;
  std::size_t pretrain_batch = 32;
  // Class whose images feed the same-class probe; its first image is the
  // Gaussian probe's base image.
  int probe_class = 0;
  std::size_t workers = 1;
};

struct ModelProfiles {
  std::string model;  // "shallow" or "deep"
  std::vector<LayerDivergenceProfile> noise;  // one per seed
  std::vector<LayerDivergenceProfile> same_class;
  // Spearman correlation between layer position and log-divergence, per seed.
  std::vector<double> noise_spearman;
  std::vector<double> class_spearman;
};

struct LayerBand {
  int layer_index = 0;
  std::string layer_name;
  double log_min = 0.0;
  double log_mean = 0.0;
  double log_max = 0.0;
};

struct AccumulationReport {
  ModelProfiles shallow;
  ModelProfiles deep;
  AccumulationSettings settings;
};

// Per-layer min / mean / max of log-divergence across seeds.
std::vector<LayerBand> log_bands(const std::vector<LayerDivergenceProfile>& profiles);

// Spearman correlation between layer position (input to output) and
// log-divergence.
double depth_trend(const LayerDivergenceProfile& profile);

// For each seed: initialise both models from the seed, train each for
// pretrain_epochs on the dataset, then profile both probe kinds.
AccumulationReport run_accumulation_experiment(const nn::ModelSpec& deep_spec, const nn::ModelSpec& shallow_spec,
                                               const data::Dataset& dataset, const AccumulationSettings& settings);

enum class WeightMode { random, orthogonal };
enum class Activation { relu, linear };

const char* weight_mode_name(WeightMode m);
WeightMode parse_weight_mode(const std::string& name);
const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

// Two consecutive linear layers: H = A1 z + b1, Z = act(H), and the next
// layer's weights A2. The layer-1 weight gradient for upstream error d at
// input z is G(d; z) = ((A2^T d) * act'(H)) z^T.
//
// Each sample draws upstream noise e ~ N(0, s_up^2) added to a fixed upstream
// signal d0, and input noise x ~ N(0, s_in^2) added to a fixed input z0.
// Inputs are rescaled to unit norm, so with orthogonal A2 and a linear
// activation |G(e; z)| = |e| exactly. Then
//   eps_prev = G(d0 + e; z) - G(d0; z0)
//   T1 = G(e; z),  T2 = G(d0; z) - G(d0; z0).
struct Theorem1Config {
  std::size_t in_width = 32;
  std::size_t hidden_width = 32;
  std::size_t out_width = 32;
  std::size_t n_samples = 10000;
  double noise_std_upstream = 0.1;
  double noise_std_input = 0.1;
  std::uint64_t seed = 0;
  WeightMode weight_mode = WeightMode::orthogonal;
  Activation activation = Activation::linear;
  std::size_t workers = 1;
};

void validate(const Theorem1Config& config);

struct Theorem1Result {
  double mean_eps_sq = 0.0;       // |e|^2
  double mean_eps_prev_sq = 0.0;  // |eps_prev|^2
  double mean_t1_sq = 0.0;
  double mean_t2_sq = 0.0;
  double mean_cross = 0.0;  // <T1, T2>
  double cross_stderr = 0.0;
  // Largest per-sample | |eps_prev|^2 - (|T1|^2 + |T2|^2 + 2<T1,T2>) | / |eps_prev|^2.
  double max_identity_rel_error = 0.0;

  bool identity_holds = false;   // max_identity_rel_error <= kIdentityTolerance
  bool cross_vanishes = false;   // |mean_cross| <= 3 * cross_stderr
  bool additive = false;         // mean_eps_prev_sq within kAdditivityTolerance of t1 + t2
  // Orthogonal-linear configurations only: the growth
  // mean_eps_prev_sq - mean_eps_sq equals mean_t2_sq within
  // kGrowthTolerance, and mean_eps_prev_sq >= mean_eps_sq.
  bool growth_matches_t2 = false;
  bool no_smaller = false;
  bool isometric = false;

  static constexpr double kIdentityTolerance = 1e-9;
  static constexpr double kAdditivityTolerance = 0.02;
  static constexpr double kGrowthTolerance = 0.02;
};

Theorem1Result theorem1_decomposition_check(const Theorem1Config& config);

// Gradient divergence of every layer of a deep linear chain with orthogonal
// square weights. Each layer's input is independently perturbed as in the
// two-layer check; the output error carries N(0, s_up^2) noise. Returns
// mean |eps_k|^2 for k = 1 (input side) .. depth.
std::vector<double> isometric_chain_profile(std::size_t depth, std::size_t width, std::size_t n_samples,
                                            double noise_std_upstream, double noise_std_input, std::uint64_t seed);

}  // namespace feddiv::lab
