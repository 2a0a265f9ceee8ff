#include "tailcp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailcp/rng.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

int nearest(const std::vector<double>& p,
            const std::vector<std::vector<double>>& centers) {
  int best = 0;
  double best_d = sqdist(p, centers[0]);
  for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
    const double d = sqdist(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<std::vector<double>> seed_plusplus(
    const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(points[rng.below(n)]);

  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sqdist(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining points coincide with a chosen center; any pick works.
      centers.push_back(points[rng.below(n)]);
      continue;
    }
    double target = rng.uniform01() * total;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int restarts, int max_iters) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (n < k) throw ConfigError("kmeans: fewer points than clusters");
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw ConfigError("kmeans: ragged points");

  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
    auto centers = seed_plusplus(points, k, rng);
    std::vector<int> assign(n, -1);

    for (int iter = 0; iter < max_iters; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        const int c = nearest(points[i], centers);
        if (c != assign[i]) {
          assign[i] = c;
          changed = true;
        }
      }
      if (!changed) break;

      std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
      std::vector<int> count(k, 0);
      for (int i = 0; i < n; ++i) {
        ++count[assign[i]];
        for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i][d];
      }
      for (int c = 0; c < k; ++c) {
        if (count[c] == 0) {
          // Re-seat an empty cluster at the point farthest from its center.
          int far = 0;
          double far_d = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d = sqdist(points[i], centers[assign[i]]);
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centers[c] = points[far];
          continue;
        }
        for (std::size_t d = 0; d < dim; ++d)
          centers[c][d] = sums[c][d] / count[c];
      }
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += sqdist(points[i], centers[assign[i]]);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centers = centers;
    }
  }
  return best;
}

}  // namespace tailcp
