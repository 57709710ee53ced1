#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mcoh/market_data.hpp"
#include "mcoh/oscillator_sim.hpp"

namespace mcoh {

// Row sums of the coupling matrix with a descending permutation; ties break
// by ascending original index so downstream scans are deterministic.
struct StrengthRanking {
  Eigen::VectorXd strengths;
  std::vector<int> order;  // indices sorted by descending strength
};

// Per-window split into the locked prefix and the drifting remainder, both
// holding original oscillator indices. `coherent` is a prefix of the
// descending-strength order; `incoherent` continues that order.
struct CoherencePartition {
  int window_index = -1;
  std::vector<int> coherent;
  std::vector<int> incoherent;
  double epsilon = 0.0;
};

// Boolean membership history: chi(t, i) = 1 iff oscillator i was in the
// coherent set of window t. counts[i] = number of windows with chi = 1.
struct CoherenceMatrix {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> chi;  // windows x stocks
  std::vector<int> counts;

  int windows() const { return static_cast<int>(chi.rows()); }
  int size() const { return static_cast<int>(chi.cols()); }
};

StrengthRanking coupling_strengths(const CouplingMatrix& coupling);

// Walks indices in descending-strength order, collecting those with
// velocity_std < epsilon; stops at the first failure. Later indices below
// epsilon stay incoherent.
CoherencePartition detect_coherent_set(const SimulationSummary& summary,
                                       const StrengthRanking& ranking,
                                       double epsilon);

std::vector<int> coherent_size_series(std::span<const CoherencePartition> partitions);

CoherenceMatrix characteristic_matrix(std::span<const CoherencePartition> partitions,
                                      int n);

}  // namespace mcoh
