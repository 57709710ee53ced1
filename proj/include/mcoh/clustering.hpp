#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcoh/coherence.hpp"
#include "mcoh/warnings.hpp"

namespace mcoh {

// 2D spectral coordinates of each stock's coherence history.
struct Embedding {
  Eigen::MatrixXd coords;  // stocks x 2
  int neighbor_k = 0;

  int size() const { return static_cast<int>(coords.rows()); }
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x dim
  double inertia = 0.0;
};

enum class CoherenceGroup { low, middle, high };

const char* to_string(CoherenceGroup group);

struct ClusterAssignment {
  std::vector<CoherenceGroup> labels;
  Eigen::MatrixXd centroids;  // indexed low, middle, high
  double inertia = 0.0;
};

struct SectorRow {
  std::string sector;
  double pct_high = 0.0;
  double pct_middle = 0.0;
  double pct_low = 0.0;
  std::string classification;  // optional cyclical/defensive tag
};

struct SectorTable {
  std::vector<SectorRow> rows;
  std::vector<std::string> unmapped;
};

struct SectorInfo {
  std::string sector;
  std::string classification;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 of them
  std::vector<int> counts;
};

// Embeds the columns of chi via a symmetric k-nearest-neighbour graph
// (Euclidean distance, binary weights, union symmetrization) and the two
// generalized Laplacian eigenvectors above the constant one. A disconnected
// graph is stitched by repeatedly linking the closest cross-component pair,
// with a warning per added edge.
Embedding laplacian_eigenmaps(const CoherenceMatrix& chi, int neighbor_k,
                              WarningLog* warnings = nullptr);

// Seeded k-means++ with Lloyd iterations (centroid shift < 1e-10 or 300
// rounds), best inertia over `restarts` runs.
KMeansResult kmeans(const Embedding& embedding, int k, std::uint64_t seed,
                    int restarts);

// Renames the three raw clusters low/middle/high by ascending mean
// involvement count; a tie falls back to the centroid x-coordinate.
ClusterAssignment label_groups(const KMeansResult& raw, std::span<const int> counts,
                               WarningLog* warnings = nullptr);

// Per-sector membership percentages (two-decimal rounding). Tickers missing
// from the map are reported, not counted.
SectorTable sector_breakdown(const ClusterAssignment& assignment,
                             std::span<const std::string> tickers,
                             const std::map<std::string, SectorInfo>& sectors);

// Equal-width histogram of involvement counts over [0, total_windows].
Histogram involvement_histogram(std::span<const int> counts, int bins,
                                int total_windows);

}  // namespace mcoh
