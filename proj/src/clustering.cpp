#include "mcoh/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mcoh/errors.hpp"
#include "mcoh/rng.hpp"

namespace mcoh {

const char* to_string(CoherenceGroup group) {
  switch (group) {
    case CoherenceGroup::low: return "low";
    case CoherenceGroup::middle: return "middle";
    case CoherenceGroup::high: return "high";
  }
  return "?";
}

namespace {

// Union-find over graph nodes.
struct Components {
  explicit Components(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
  std::vector<int> parent;
};

}  // namespace

Embedding laplacian_eigenmaps(const CoherenceMatrix& chi, int neighbor_k,
                              WarningLog* warnings) {
  const int n = chi.size();
  if (neighbor_k < 1) throw config_error("neighbor_k must be >= 1");
  if (n < neighbor_k + 1)
    throw config_error("need at least neighbor_k + 1 stocks to embed");

  // Squared Euclidean distances between chi columns via the Gram matrix;
  // on 0/1 vectors this is the Hamming distance.
  const Eigen::MatrixXd points = chi.chi.cast<double>();
  const Eigen::VectorXd ones = points.colwise().sum();
  Eigen::MatrixXd gram = points.transpose() * points;
  Eigen::MatrixXd dist2 =
      (ones.replicate(1, n) + ones.transpose().replicate(n, 1) - 2.0 * gram)
          .cwiseMax(0.0);

  if (dist2.maxCoeff() == 0.0)
    throw data_error(
        "all coherence histories are identical; nothing to embed "
        "(revisit epsilon or the window range)");

  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> nearest(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) nearest[m++] = j;
    std::partial_sort(nearest.begin(), nearest.begin() + neighbor_k, nearest.end(),
                      [&](int a, int b) {
                        if (dist2(i, a) != dist2(i, b)) return dist2(i, a) < dist2(i, b);
                        return a < b;
                      });
    for (int r = 0; r < neighbor_k; ++r) {
      weights(i, nearest[r]) = 1.0;
      weights(nearest[r], i) = 1.0;  // union symmetrization
    }
  }

  Components components(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (weights(i, j) > 0.0) components.unite(i, j);

  int n_components = 0;
  for (int i = 0; i < n; ++i)
    if (components.find(i) == i) ++n_components;

  while (n_components > 1) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (components.find(i) != components.find(j) && dist2(i, j) < best) {
          best = dist2(i, j);
          bi = i;
          bj = j;
        }
    weights(bi, bj) = weights(bj, bi) = 1.0;
    components.unite(bi, bj);
    --n_components;
    if (warnings)
      warnings->add("neighbour graph disconnected; linked nodes " +
                    std::to_string(bi) + " and " + std::to_string(bj));
  }

  const Eigen::VectorXd degree = weights.rowwise().sum();
  Eigen::MatrixXd laplacian = Eigen::MatrixXd(degree.asDiagonal()) - weights;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      laplacian, Eigen::MatrixXd(degree.asDiagonal()));
  if (solver.info() != Eigen::Success)
    throw numerical_error("generalized eigensolve failed");

  Embedding embedding;
  embedding.neighbor_k = neighbor_k;
  embedding.coords = solver.eigenvectors().middleCols(1, 2);

  // Canonical sign: the entry of largest magnitude is positive.
  for (int c = 0; c < 2; ++c) {
    int arg = 0;
    embedding.coords.col(c).cwiseAbs().maxCoeff(&arg);
    if (embedding.coords(arg, c) < 0.0) embedding.coords.col(c) *= -1.0;
  }
  return embedding;
}

namespace {

double squared_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

KMeansResult lloyd_once(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  const int dim = static_cast<int>(points.cols());
  auto engine = make_engine(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centroids(k, dim);
  std::uniform_int_distribution<int> first(0, n - 1);
  centroids.row(0) = points.row(first(engine));
  Eigen::VectorXd d2(n);
  for (int c = 1; c < k; ++c) {
    for (int i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int p = 0; p < c; ++p)
        nearest = std::min(nearest, squared_dist(points.row(i), centroids.row(p)));
      d2(i) = nearest;
    }
    const double total = d2.sum();
    int chosen = n - 1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> uniform(0.0, total);
      const double target = uniform(engine);
      double cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += d2(i);
        if (cum >= target) { chosen = i; break; }
      }
    } else {
      chosen = first(engine);  // all points coincide with a centroid
    }
    centroids.row(c) = points.row(chosen);
  }

  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = squared_dist(points.row(i), centroids.row(c));
        if (d < best) { best = d; labels[i] = c; }
      }
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
    std::vector<int> sizes(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(labels[i]) += points.row(i);
      ++sizes[labels[i]];
    }
    // Empty cluster: seize the point farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      int worst = -1;
      double far = -1.0;
      for (int i = 0; i < n; ++i) {
        if (sizes[labels[i]] <= 1) continue;
        const double d = squared_dist(points.row(i), centroids.row(labels[i]));
        if (d > far) { far = d; worst = i; }
      }
      if (worst < 0) continue;
      sums.row(labels[worst]) -= points.row(worst);
      --sizes[labels[worst]];
      labels[worst] = c;
      sums.row(c) = points.row(worst);
      sizes[c] = 1;
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      const Eigen::RowVectorXd updated = sums.row(c) / sizes[c];
      shift = std::max(shift, (updated - centroids.row(c)).norm());
      centroids.row(c) = updated;
    }
    if (shift < 1e-10) break;
  }

  // Final assignment against the converged centroids.
  KMeansResult result;
  result.labels.resize(n);
  result.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = squared_dist(points.row(i), centroids.row(c));
      if (d < best) { best = d; result.labels[i] = c; }
    }
    result.inertia += best;
  }
  result.centroids = centroids;
  return result;
}

}  // namespace

KMeansResult kmeans(const Embedding& embedding, int k, std::uint64_t seed,
                    int restarts) {
  const int n = embedding.size();
  if (k < 1) throw config_error("k must be >= 1");
  if (k > n) throw config_error("k exceeds the number of points");
  if (restarts < 1) throw config_error("restarts must be >= 1");

  KMeansResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult candidate = lloyd_once(embedding.coords, k, mix_seed(seed, r));
    if (!have || candidate.inertia < best.inertia) {
      best = std::move(candidate);
      have = true;
    }
  }
  return best;
}

ClusterAssignment label_groups(const KMeansResult& raw, std::span<const int> counts,
                               WarningLog* warnings) {
  const int k = static_cast<int>(raw.centroids.rows());
  if (k != 3) throw config_error("group labelling expects exactly 3 clusters");
  if (counts.size() != raw.labels.size())
    throw config_error("labels/counts size mismatch");

  double mean_count[3] = {0.0, 0.0, 0.0};
  int sizes[3] = {0, 0, 0};
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    mean_count[raw.labels[i]] += counts[i];
    ++sizes[raw.labels[i]];
  }
  for (int c = 0; c < 3; ++c)
    if (sizes[c] > 0) mean_count[c] /= sizes[c];

  std::array<int, 3> by_involvement{0, 1, 2};
  std::sort(by_involvement.begin(), by_involvement.end(), [&](int a, int b) {
    if (mean_count[a] != mean_count[b]) return mean_count[a] < mean_count[b];
    return raw.centroids(a, 0) < raw.centroids(b, 0);
  });
  if ((mean_count[by_involvement[0]] == mean_count[by_involvement[1]] ||
       mean_count[by_involvement[1]] == mean_count[by_involvement[2]]) &&
      warnings)
    warnings->add("mean involvement tie between clusters; ordered by centroid x");

  std::array<CoherenceGroup, 3> names{};
  names[by_involvement[0]] = CoherenceGroup::low;
  names[by_involvement[1]] = CoherenceGroup::middle;
  names[by_involvement[2]] = CoherenceGroup::high;

  ClusterAssignment assignment;
  assignment.inertia = raw.inertia;
  assignment.labels.resize(raw.labels.size());
  for (std::size_t i = 0; i < raw.labels.size(); ++i)
    assignment.labels[i] = names[raw.labels[i]];
  assignment.centroids.resize(3, raw.centroids.cols());
  assignment.centroids.row(0) = raw.centroids.row(by_involvement[0]);
  assignment.centroids.row(1) = raw.centroids.row(by_involvement[1]);
  assignment.centroids.row(2) = raw.centroids.row(by_involvement[2]);
  return assignment;
}

SectorTable sector_breakdown(const ClusterAssignment& assignment,
                             std::span<const std::string> tickers,
                             const std::map<std::string, SectorInfo>& sectors) {
  if (sectors.empty()) throw data_error("sector map is empty");
  if (tickers.size() != assignment.labels.size())
    throw config_error("tickers/labels size mismatch");

  struct Tally {
    int high = 0, middle = 0, low = 0;
    std::string classification;
  };
  std::map<std::string, Tally> tallies;
  SectorTable table;
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    const auto it = sectors.find(tickers[i]);
    if (it == sectors.end()) {
      table.unmapped.push_back(tickers[i]);
      continue;
    }
    Tally& tally = tallies[it->second.sector];
    tally.classification = it->second.classification;
    switch (assignment.labels[i]) {
      case CoherenceGroup::high: ++tally.high; break;
      case CoherenceGroup::middle: ++tally.middle; break;
      case CoherenceGroup::low: ++tally.low; break;
    }
  }
  if (tallies.empty()) throw data_error("no ticker matched the sector map");

  auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  for (const auto& [sector, tally] : tallies) {
    const int total = tally.high + tally.middle + tally.low;
    SectorRow row;
    row.sector = sector;
    row.pct_high = round2(100.0 * tally.high / total);
    row.pct_middle = round2(100.0 * tally.middle / total);
    row.pct_low = round2(100.0 * tally.low / total);
    row.classification = tally.classification;
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const SectorRow& a, const SectorRow& b) {
              if (a.pct_high != b.pct_high) return a.pct_high > b.pct_high;
              return a.sector < b.sector;
            });
  return table;
}

Histogram involvement_histogram(std::span<const int> counts, int bins,
                                int total_windows) {
  if (bins < 1) throw config_error("bins must be >= 1");
  if (total_windows < 0) throw config_error("total_windows must be >= 0");

  Histogram histogram;
  histogram.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    histogram.edges[b] = static_cast<double>(total_windows) * b / bins;
  histogram.counts.assign(bins, 0);
  for (const int count : counts) {
    int bin = total_windows > 0
                  ? static_cast<int>((static_cast<long long>(count) * bins) / total_windows)
                  : 0;
    bin = std::clamp(bin, 0, bins - 1);
    ++histogram.counts[bin];
  }
  return histogram;
}

}  // namespace mcoh
