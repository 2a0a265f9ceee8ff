#ifndef TAILCP_KMEANS_HPP
#define TAILCP_KMEANS_HPP

#include <cstdint>
#include <vector>

namespace tailcp {

struct KmeansResult {
  std::vector<int> assignment;               // point -> cluster id
  std::vector<std::vector<double>> centers;  // k centers
  double inertia = 0.0;                      // sum of squared distances
};

// Lloyd's algorithm with k-means++ seeding, `restarts` independent seeded
// starts, keeping the lowest-inertia run. Deterministic given `seed`;
// nearest-center ties resolve to the smaller cluster id, so coincident
// points always land in the same cluster. Requires 1 <= k <= points.size().
KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int restarts = 10,
                    int max_iters = 100);

}  // namespace tailcp

#endif  // TAILCP_KMEANS_HPP
