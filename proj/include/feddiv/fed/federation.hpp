#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "feddiv/data/dataset.hpp"
#include "feddiv/data/partition.hpp"
#include "feddiv/data/transforms.hpp"
#include "feddiv/nn/network.hpp"

namespace feddiv::fed {

enum class Precision { f64, f32 };

const char* precision_name(Precision p);
Precision parse_precision(const std::string& name);

struct FederationConfig {
  std::size_t n_clients = 5;
  int local_epochs = 4;
  int rounds = 30;
  double lr = 0.02;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  int eval_every = 1;
  // Threads used for client training. Results do not depend on it.
  std::size_t workers = 1;
  nn::InitScheme init = nn::InitScheme::kaiming_uniform;
  // f32 trains clients in single precision; aggregation and divergence stay
  // in double.
  Precision precision = Precision::f64;
};

void validate(const FederationConfig& config);

struct RoundRecord {
  int round = 0;  // 1-based
  std::map<int, double> per_layer_divergence;
  double mean_divergence = 0.0;
  // Set on evaluated rounds only.
  std::optional<double> test_accuracy;
  std::optional<double> test_loss;
  // Mean minibatch loss over all clients' local steps this round.
  double train_loss = 0.0;
};

struct LocalTrainStats {
  std::size_t steps = 0;
  double mean_loss = 0.0;
};

// E epochs of minibatch SGD over the samples in `shard`. Each epoch shuffles
// the shard with `rng`; the last batch of an epoch may be short. When
// augmentation is enabled every image of every batch is transformed with
// draws from the same `rng`.
template <typename T>
nn::BasicParameterSet<T> local_train(const nn::ModelSpec& spec, const nn::BasicParameterSet<T>& params,
                                     const data::Dataset& dataset, std::span<const std::size_t> shard,
                                     int epochs, double lr, std::size_t batch_size, Rng& rng,
                                     const data::AugmentationSpec& aug = {}, LocalTrainStats* stats = nullptr);

// Weighted per-element mean. Weights default to uniform, must be non-negative
// and sum to 1. The reduction is independent of client order.
nn::ParameterSet aggregate(std::span<const nn::ParameterSet> clients,
                           std::optional<std::span<const double>> weights = std::nullopt);

// (1/N) sum_i sqrt(|w_i - mean|^2 / d) over the flattened parameters of one
// layer. Independent of client order.
double layer_divergence(std::span<const nn::ParameterSet> clients, int layer);

// Divergence of every parameterized layer, keyed by layer index.
std::map<int, double> all_layer_divergences(std::span<const nn::ParameterSet> clients);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Top-1 accuracy (ties to the lowest class) and mean cross-entropy.
Evaluation evaluate(const nn::ModelSpec& spec, const nn::ParameterSet& params, const data::Dataset& test);

// Called after aggregation each round with the new global parameters and the
// clients' post-training parameters (index = client id).
using RoundObserver =
    std::function<void(int round, const nn::ParameterSet& global, std::span<const nn::ParameterSet> clients)>;

std::vector<RoundRecord> run_federation(const FederationConfig& config, const nn::ModelSpec& spec,
                                        const data::Dataset& train, const data::Dataset& test,
                                        const data::ClientPartition& partition,
                                        const data::AugmentationSpec& aug = {}, const RoundObserver& observer = {});

struct EpochRecord {
  int epoch = 0;  // 0 is the initial model
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double train_loss = 0.0;  // mean minibatch loss; 0 for epoch 0
};

struct CentralizedConfig {
  int epochs = 1;
  double lr = 0.02;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  nn::InitScheme init = nn::InitScheme::kaiming_uniform;
  Precision precision = Precision::f64;
};

using EpochObserver = std::function<void(int epoch, const nn::ParameterSet& params)>;

// Minibatch SGD on the pooled training set. Returns records for epochs
// 0..epochs. Epoch t draws from the same stream as client 0 in round t of a
// federation with the same seed.
std::vector<EpochRecord> run_centralized(const nn::ModelSpec& spec, const data::Dataset& train,
                                         const data::Dataset& test, const CentralizedConfig& config,
                                         const data::AugmentationSpec& aug = {},
                                         const EpochObserver& observer = {});

// Stream seed for a client in a round.
std::uint64_t client_seed(std::uint64_t seed, int round, std::size_t client);

}  // namespace feddiv::fed
