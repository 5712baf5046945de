#include "feddiv/data/partition.hpp"

#include <algorithm>

#include "feddiv/rng.hpp"

namespace feddiv::data {

ClientPartition partition_iid(const Dataset& dataset, std::size_t n_clients, std::uint64_t seed) {
  if (n_clients < 1) throw ValidationError("n_clients must be >= 1");
  if (n_clients > dataset.size())
    throw ValidationError("n_clients " + std::to_string(n_clients) + " exceeds dataset size " +
                          std::to_string(dataset.size()));
  Rng rng(seed);
  ClientPartition out;
  out.assignments.resize(n_clients);
  std::size_t deal = 0;
  for (int c = 0; c < dataset.class_count; ++c) {
    auto members = class_indices(dataset, c);
    rng.shuffle(members.begin(), members.end());
    for (std::size_t idx : members) out.assignments[deal++ % n_clients].push_back(idx);
  }
  for (auto& list : out.assignments) std::sort(list.begin(), list.end());
  return out;
}

void validate(const ClientPartition& partition, std::size_t dataset_size) {
  if (partition.assignments.empty()) throw ValidationError("partition has no clients");
  std::vector<bool> seen(dataset_size, false);
  for (std::size_t c = 0; c < partition.assignments.size(); ++c) {
    if (partition.assignments[c].empty())
      throw ValidationError("client " + std::to_string(c) + " has an empty shard");
    for (std::size_t idx : partition.assignments[c]) {
      if (idx >= dataset_size)
        throw ValidationError("client " + std::to_string(c) + " holds index " + std::to_string(idx) +
                              " outside a dataset of " + std::to_string(dataset_size));
      if (seen[idx]) throw ValidationError("index " + std::to_string(idx) + " assigned twice");
      seen[idx] = true;
    }
  }
}

}  // namespace feddiv::data
