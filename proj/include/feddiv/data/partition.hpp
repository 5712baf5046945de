#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "feddiv/data/dataset.hpp"

namespace feddiv::data {

struct ClientPartition {
  std::vector<std::vector<std::size_t>> assignments;

  std::size_t client_count() const noexcept { return assignments.size(); }
};

// Shuffles each class, then deals its samples round-robin to the clients.
// The deal position carries over between classes so shard sizes differ by at
// most one. Each client's list is sorted ascending.
ClientPartition partition_iid(const Dataset& dataset, std::size_t n_clients, std::uint64_t seed);

// Disjointness and index range. Coverage is not required.
void validate(const ClientPartition& partition, std::size_t dataset_size);

}  // namespace feddiv::data
