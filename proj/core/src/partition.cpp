#include "tailcp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tailcp {

int HeadTailPartition::head_count() const {
  int c = 0;
  for (auto m : head_mask) c += m != 0;
  return c;
}

ClassPrior estimate_prior(const LabeledBatch& batch, int K, double smoothing) {
  if (K <= 0) throw ConfigError("estimate_prior: K must be positive");
  if (batch.n() < 1) throw ConfigError("estimate_prior: empty batch");
  if (smoothing < 0.0) throw ConfigError("estimate_prior: negative smoothing");

  std::vector<double> count(K, 0.0);
  for (int y : batch.labels) {
    if (y < 0 || y >= K) throw DataError("estimate_prior: label out of range");
    count[y] += 1.0;
  }
  const double denom = static_cast<double>(batch.n()) + K * smoothing;
  ClassPrior prior;
  prior.p.resize(K);
  for (int k = 0; k < K; ++k) prior.p[k] = (count[k] + smoothing) / denom;
  return prior;
}

ClassPrior prior_from_values(std::vector<double> values) {
  if (values.empty()) throw ConfigError("prior needs at least one class");
  double sum = 0.0;
  for (double v : values) {
    if (v < 0.0) throw DataError("prior entries must be >= 0");
    sum += v;
  }
  if (sum <= 0.0) throw DataError("prior mass must be positive");
  for (double& v : values) v /= sum;
  return ClassPrior{std::move(values)};
}

HeadTailPartition head_tail_partition(const ClassPrior& prior, double eta) {
  if (eta <= 0.0 || eta > 1.0)
    throw ConfigError("head_tail_partition: eta must be in (0,1]");
  const int K = prior.K();
  if (K == 0) throw ConfigError("head_tail_partition: empty prior");

  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (prior.p[a] != prior.p[b]) return prior.p[a] > prior.p[b];
    return a < b;
  });

  HeadTailPartition part;
  part.eta = eta;
  part.head_mask.assign(K, 0);
  double cum = 0.0;
  for (int k : order) {
    part.head_mask[k] = 1;
    cum += prior.p[k];
    // fp guard: a cumulative sum that is eta up to rounding counts as reached
    if (cum >= eta - 1e-12) break;
  }
  return part;
}

}  // namespace tailcp
