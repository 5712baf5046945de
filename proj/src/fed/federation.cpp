#include "feddiv/fed/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../parallel.hpp"

namespace feddiv::fed {
namespace {

template <typename T>
BasicTensor<T> to_precision(Tensor t) {
  if constexpr (std::is_same_v<T, double>) {
    return t;
  } else {
    return BasicTensor<T>(t.shape(), std::vector<T>(t.values().begin(), t.values().end()));
  }
}

Tensor make_batch(const data::Dataset& dataset, std::span<const std::size_t> idx, Rng& rng,
                  const data::AugmentationSpec& aug) {
  Tensor batch = data::gather_images(dataset, idx);
  if (aug.mode == data::AugmentMode::none) return batch;
  const std::size_t stride = dataset.image_size();
  const Shape image_shape = dataset.image_shape();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Tensor image(image_shape, std::vector<double>(batch.data() + i * stride, batch.data() + (i + 1) * stride));
    const Tensor out = data::augment(image, rng, aug);
    std::copy(out.values().begin(), out.values().end(), batch.data() + i * stride);
  }
  return batch;
}

// Order-independent weighted mean of one element across clients: the
// (value, weight) pairs are sorted and the weighted offsets from the smallest
// value are summed. Identical inputs return that value exactly.
class ElementReducer {
 public:
  explicit ElementReducer(std::size_t n) : pairs_(n) {}

  double mean(const double* const* columns, std::size_t j, std::span<const double> weights) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) pairs_[i] = {columns[i][j], weights[i]};
    std::sort(pairs_.begin(), pairs_.end());
    const double ref = pairs_.front().first;
    double acc = 0.0;
    for (const auto& [v, w] : pairs_) acc += w * (v - ref);
    return ref + acc;
  }

 private:
  std::vector<std::pair<double, double>> pairs_;
};

void check_clients(std::span<const nn::ParameterSet> clients) {
  if (clients.empty()) throw ValidationError("need at least one client");
  for (std::size_t i = 1; i < clients.size(); ++i)
    if (!clients[0].congruent_with(clients[i]))
      throw ShapeError("client " + std::to_string(i) + " parameters are not congruent with client 0");
}

std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

nn::ParameterSet train_client(const nn::ModelSpec& spec, const nn::ParameterSet& global, const data::Dataset& train,
                              std::span<const std::size_t> shard, int epochs, double lr, std::size_t batch_size,
                              Rng& rng, const data::AugmentationSpec& aug, Precision precision,
                              LocalTrainStats* stats) {
  if (precision == Precision::f64)
    return local_train<double>(spec, global, train, shard, epochs, lr, batch_size, rng, aug, stats);
  const auto start = nn::cast_params<float>(global);
  return nn::cast_params<double>(
      local_train<float>(spec, start, train, shard, epochs, lr, batch_size, rng, aug, stats));
}

}  // namespace

const char* precision_name(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision parse_precision(const std::string& name) {
  if (name == "f64") return Precision::f64;
  if (name == "f32") return Precision::f32;
  throw ValidationError("unknown precision '" + name + "'");
}

void validate(const FederationConfig& c) {
  if (c.n_clients < 1) throw ValidationError("must be >= 1", "n_clients");
  if (c.local_epochs < 1) throw ValidationError("must be >= 1", "local_epochs");
  if (c.rounds < 1) throw ValidationError("must be >= 1", "rounds");
  if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) throw ValidationError("must be finite and >= 0", "lr");
  if (c.batch_size < 1) throw ValidationError("must be >= 1", "batch_size");
  if (c.eval_every < 1) throw ValidationError("must be >= 1", "eval_every");
  if (c.workers < 1) throw ValidationError("must be >= 1", "workers");
}

std::uint64_t client_seed(std::uint64_t seed, int round, std::size_t client) {
  return derive_seed(seed, static_cast<std::uint64_t>(round), client);
}

template <typename T>
nn::BasicParameterSet<T> local_train(const nn::ModelSpec& spec, const nn::BasicParameterSet<T>& params,
                                     const data::Dataset& dataset, std::span<const std::size_t> shard,
                                     int epochs, double lr, std::size_t batch_size, Rng& rng,
                                     const data::AugmentationSpec& aug, LocalTrainStats* stats) {
  if (shard.empty()) throw ValidationError("client shard is empty");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  nn::BasicParameterSet<T> out = params;
  std::vector<std::size_t> order(shard.begin(), shard.end());
  std::size_t steps = 0;
  double loss_sum = 0.0;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch_size, order.size() - start));
      const auto batch = to_precision<T>(make_batch(dataset, idx, rng, aug));
      const auto labels = data::gather_labels(dataset, idx);
      const auto result = nn::loss_and_grad(spec, out, batch, labels);
      nn::sgd_step_inplace(out, result.grads, lr);
      loss_sum += static_cast<double>(result.loss);
      ++steps;
    }
  }
  if (stats != nullptr) *stats = {steps, steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps)};
  return out;
}

template nn::BasicParameterSet<double> local_train<double>(const nn::ModelSpec&, const nn::BasicParameterSet<double>&,
                                                           const data::Dataset&, std::span<const std::size_t>, int,
                                                           double, std::size_t, Rng&, const data::AugmentationSpec&,
                                                           LocalTrainStats*);
template nn::BasicParameterSet<float> local_train<float>(const nn::ModelSpec&, const nn::BasicParameterSet<float>&,
                                                         const data::Dataset&, std::span<const std::size_t>, int,
                                                         double, std::size_t, Rng&, const data::AugmentationSpec&,
                                                         LocalTrainStats*);

nn::ParameterSet aggregate(std::span<const nn::ParameterSet> clients, std::optional<std::span<const double>> weights) {
  check_clients(clients);
  const std::size_t n = clients.size();
  std::vector<double> w = weights ? std::vector<double>(weights->begin(), weights->end()) : uniform_weights(n);
  if (w.size() != n)
    throw ValidationError("got " + std::to_string(w.size()) + " weights for " + std::to_string(n) + " clients");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("aggregation weights must be finite and >= 0");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("aggregation weights must sum to 1");

  nn::ParameterSet out = clients[0];
  ElementReducer reducer(n);
  std::vector<const double*> columns(n);
  for (auto& [layer, entries] : out.layers()) {
    for (std::size_t e = 0; e < entries.size(); ++e) {
      for (std::size_t i = 0; i < n; ++i) columns[i] = clients[i].layer(layer)[e].tensor.data();
      auto& dst = entries[e].tensor;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = reducer.mean(columns.data(), j, w);
    }
  }
  return out;
}

double layer_divergence(std::span<const nn::ParameterSet> clients, int layer) {
  check_clients(clients);
  const std::size_t n = clients.size();
  std::vector<std::vector<double>> flat;
  flat.reserve(n);
  for (const auto& c : clients) flat.push_back(nn::flatten_layer_params(c, layer));
  const std::size_t d = flat[0].size();
  std::vector<const double*> columns(n);
  for (std::size_t i = 0; i < n; ++i) columns[i] = flat[i].data();
  const auto w = uniform_weights(n);
  ElementReducer reducer(n);
  std::vector<double> sq(n, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean = reducer.mean(columns.data(), j, w);
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = flat[i][j] - mean;
      sq[i] += diff * diff;
    }
  }
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = std::sqrt(sq[i] / static_cast<double>(d));
  std::sort(dist.begin(), dist.end());
  double total = 0.0;
  for (double x : dist) total += x;
  return total / static_cast<double>(n);
}

std::map<int, double> all_layer_divergences(std::span<const nn::ParameterSet> clients) {
  check_clients(clients);
  std::map<int, double> out;
  for (const auto& [layer, entries] : clients[0].layers()) out[layer] = layer_divergence(clients, layer);
  return out;
}

Evaluation evaluate(const nn::ModelSpec& spec, const nn::ParameterSet& params, const data::Dataset& test) {
  if (test.size() == 0) throw ValidationError("test set is empty");
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    const std::size_t end = std::min(test.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = nn::forward(spec, params, data::gather_images(test, idx));
    const auto labels = data::gather_labels(test, idx);
    const auto pred = nn::argmax_rows(logits);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    loss_sum += nn::cross_entropy(logits, std::span<const int>(labels)) * static_cast<double>(idx.size());
  }
  return {static_cast<double>(correct) / static_cast<double>(test.size()),
          loss_sum / static_cast<double>(test.size())};
}

std::vector<RoundRecord> run_federation(const FederationConfig& config, const nn::ModelSpec& spec,
                                        const data::Dataset& train, const data::Dataset& test,
                                        const data::ClientPartition& partition, const data::AugmentationSpec& aug,
                                        const RoundObserver& observer) {
  validate(config);
  nn::validate(spec);
  data::validate(aug);
  if (partition.client_count() != config.n_clients)
    throw ValidationError("partition has " + std::to_string(partition.client_count()) + " clients, config has " +
                          std::to_string(config.n_clients));
  data::validate(partition, train.size());
  for (std::size_t c = 0; c < partition.client_count(); ++c)
    if (partition.assignments[c].size() < config.batch_size)
      throw ValidationError("batch_size " + std::to_string(config.batch_size) + " exceeds client " +
                                std::to_string(c) + " shard of " + std::to_string(partition.assignments[c].size()),
                            "batch_size");

  nn::ParameterSet global = nn::init_params<double>(spec, config.seed, config.init);
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(config.rounds));
  const std::size_t n = config.n_clients;
  for (int t = 1; t <= config.rounds; ++t) {
    std::vector<nn::ParameterSet> clients(n);
    std::vector<LocalTrainStats> stats(n);
    detail::parallel_for(n, config.workers, [&](std::size_t c) {
      Rng rng(client_seed(config.seed, t, c));
      clients[c] = train_client(spec, global, train, partition.assignments[c], config.local_epochs, config.lr,
                                config.batch_size, rng, aug, config.precision, &stats[c]);
    });

    RoundRecord rec;
    rec.round = t;
    rec.per_layer_divergence = all_layer_divergences(clients);
    double total = 0.0;
    for (const auto& [layer, div] : rec.per_layer_divergence) total += div;
    rec.mean_divergence = total / static_cast<double>(rec.per_layer_divergence.size());

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& s : stats) {
      loss_sum += s.mean_loss * static_cast<double>(s.steps);
      steps += s.steps;
    }
    rec.train_loss = loss_sum / static_cast<double>(steps);

    global = aggregate(clients);
    if (t % config.eval_every == 0 || t == config.rounds) {
      const auto ev = evaluate(spec, global, test);
      rec.test_accuracy = ev.accuracy;
      rec.test_loss = ev.loss;
    }
    records.push_back(std::move(rec));
    if (observer) observer(t, global, clients);
  }
  return records;
}

std::vector<EpochRecord> run_centralized(const nn::ModelSpec& spec, const data::Dataset& train,
                                         const data::Dataset& test, const CentralizedConfig& config,
                                         const data::AugmentationSpec& aug, const EpochObserver& observer) {
  nn::validate(spec);
  data::validate(aug);
  if (config.epochs < 0) throw ValidationError("must be >= 0", "epochs");
  if (!(config.lr >= 0.0)) throw ValidationError("must be >= 0", "lr");
  if (config.batch_size < 1) throw ValidationError("must be >= 1", "batch_size");

  nn::ParameterSet params = nn::init_params<double>(spec, config.seed, config.init);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<EpochRecord> records;
  const auto initial = evaluate(spec, params, test);
  records.push_back({0, initial.accuracy, initial.loss, 0.0});
  if (observer) observer(0, params);
  for (int t = 1; t <= config.epochs; ++t) {
    Rng rng(client_seed(config.seed, t, 0));
    LocalTrainStats stats;
    params = train_client(spec, params, train, all, 1, config.lr, config.batch_size, rng, aug, config.precision,
                          &stats);
    const auto ev = evaluate(spec, params, test);
    records.push_back({t, ev.accuracy, ev.loss, stats.mean_loss});
    if (observer) observer(t, params);
  }
  return records;
}

}  // namespace feddiv::fed
