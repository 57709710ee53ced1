#include "mcoh/coherence.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mcoh/errors.hpp"

namespace mcoh {

StrengthRanking coupling_strengths(const CouplingMatrix& coupling) {
  StrengthRanking ranking;
  ranking.strengths = coupling.values.rowwise().sum();
  ranking.order.resize(coupling.size());
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
    if (ranking.strengths(a) != ranking.strengths(b))
      return ranking.strengths(a) > ranking.strengths(b);
    return a < b;
  });
  return ranking;
}

CoherencePartition detect_coherent_set(const SimulationSummary& summary,
                                       const StrengthRanking& ranking,
                                       double epsilon) {
  if (!(epsilon > 0.0)) throw config_error("epsilon must be > 0");
  const int n = static_cast<int>(ranking.order.size());
  if (summary.velocity_std.size() != n)
    throw config_error("summary/ranking dimension mismatch");

  CoherencePartition partition;
  partition.window_index = summary.window_index;
  partition.epsilon = epsilon;
  int pos = 0;
  while (pos < n && summary.velocity_std(ranking.order[pos]) < epsilon) {
    partition.coherent.push_back(ranking.order[pos]);
    ++pos;
  }
  partition.incoherent.assign(ranking.order.begin() + pos, ranking.order.end());
  return partition;
}

std::vector<int> coherent_size_series(std::span<const CoherencePartition> partitions) {
  std::vector<int> sizes;
  sizes.reserve(partitions.size());
  for (const auto& partition : partitions)
    sizes.push_back(static_cast<int>(partition.coherent.size()));
  return sizes;
}

CoherenceMatrix characteristic_matrix(std::span<const CoherencePartition> partitions,
                                      int n) {
  CoherenceMatrix result;
  result.chi.setZero(static_cast<Eigen::Index>(partitions.size()), n);
  for (std::size_t t = 0; t < partitions.size(); ++t) {
    const auto& partition = partitions[t];
    if (static_cast<int>(partition.coherent.size() + partition.incoherent.size()) != n)
      throw data_error("window " + std::to_string(partition.window_index) +
                       " covers " +
                       std::to_string(partition.coherent.size() +
                                      partition.incoherent.size()) +
                       " indices, expected " + std::to_string(n));
    for (int i : partition.coherent) {
      if (i < 0 || i >= n)
        throw data_error("index " + std::to_string(i) + " out of range");
      result.chi(static_cast<Eigen::Index>(t), i) = 1;
    }
  }
  result.counts.assign(n, 0);
  for (int i = 0; i < n; ++i)
    result.counts[i] = static_cast<int>(result.chi.col(i).cast<int>().sum());
  return result;
}

}  // namespace mcoh
