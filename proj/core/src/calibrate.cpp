#include "tailcp/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailcp/data.hpp"
#include "tailcp/kmeans.hpp"
#include "tailcp/rng.hpp"

namespace tailcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::int64_t quantile_order_index(std::int64_t count, double level) {
  const double x = static_cast<double>(count) * level;
  // The product of an exact rational level with a small integer can land a
  // few ulps above the true value (e.g. 10 * 0.9); nudge before ceiling.
  return static_cast<std::int64_t>(std::ceil(x - 1e-9 - 1e-12 * std::abs(x)));
}

namespace {

double order_statistic_quantile(std::span<const double> scores, double level,
                                bool* empty_input) {
  if (empty_input != nullptr) *empty_input = scores.empty();
  if (scores.empty()) return kInf;
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  const std::int64_t m = quantile_order_index(n + 1, level);
  if (m > n) return kInf;
  if (m < 1) throw ConfigError("quantile level produced a rank below 1");
  std::vector<double> scratch(scores.begin(), scores.end());
  std::nth_element(scratch.begin(), scratch.begin() + (m - 1), scratch.end());
  return scratch[m - 1];
}

}  // namespace

double conformal_quantile(std::span<const double> scores, double alpha,
                          bool* empty_input) {
  if (alpha <= 0.0 || alpha >= 1.0)
    throw ConfigError("alpha must be in (0,1)");
  return order_statistic_quantile(scores, 1.0 - alpha, empty_input);
}

ThresholdMap ThresholdMap::make_global(double tau) {
  ThresholdMap t;
  t.kind_ = Kind::global;
  t.global_ = tau;
  return t;
}

ThresholdMap ThresholdMap::make_per_group(std::vector<std::uint8_t> head_mask,
                                          double tau_head, double tau_tail) {
  ThresholdMap t;
  t.kind_ = Kind::per_group;
  t.head_mask_ = std::move(head_mask);
  t.head_ = tau_head;
  t.tail_ = tau_tail;
  return t;
}

ThresholdMap ThresholdMap::make_per_class(std::vector<double> taus) {
  ThresholdMap t;
  t.kind_ = Kind::per_class;
  t.by_class_ = std::move(taus);
  return t;
}

ThresholdMap ThresholdMap::make_per_cluster(std::vector<int> cluster_of,
                                            std::vector<double> cluster_taus,
                                            double null_tau) {
  ThresholdMap t;
  t.kind_ = Kind::per_cluster;
  t.cluster_of_ = std::move(cluster_of);
  t.cluster_taus_ = std::move(cluster_taus);
  t.null_tau_ = null_tau;
  return t;
}

double ThresholdMap::resolve(int y) const {
  switch (kind_) {
    case Kind::global:
      return global_;
    case Kind::per_group:
      if (y < 0 || y >= static_cast<int>(head_mask_.size()))
        throw ConfigError("threshold lookup: class out of range");
      return head_mask_[y] ? head_ : tail_;
    case Kind::per_class:
      if (y < 0 || y >= static_cast<int>(by_class_.size()))
        throw ConfigError("threshold lookup: class out of range");
      return by_class_[y];
    case Kind::per_cluster: {
      if (y < 0 || y >= static_cast<int>(cluster_of_.size()))
        throw ConfigError("threshold lookup: class out of range");
      const int c = cluster_of_[y];
      return c < 0 ? null_tau_ : cluster_taus_[c];
    }
  }
  throw ConfigError("unknown threshold kind");
}

int ThresholdMap::num_classes() const {
  switch (kind_) {
    case Kind::global:
      return 0;
    case Kind::per_group:
      return static_cast<int>(head_mask_.size());
    case Kind::per_class:
      return static_cast<int>(by_class_.size());
    case Kind::per_cluster:
      return static_cast<int>(cluster_of_.size());
  }
  return 0;
}

bool operator==(const ThresholdMap& a, const ThresholdMap& b) {
  return a.kind_ == b.kind_ && a.global_ == b.global_ &&
         a.head_mask_ == b.head_mask_ && a.head_ == b.head_ &&
         a.tail_ == b.tail_ && a.by_class_ == b.by_class_ &&
         a.cluster_of_ == b.cluster_of_ && a.cluster_taus_ == b.cluster_taus_ &&
         a.null_tau_ == b.null_tau_;
}

ThresholdMap calibrate_standard(std::span<const double> cal_scores,
                                double alpha) {
  return ThresholdMap::make_global(conformal_quantile(cal_scores, alpha));
}

ThresholdMap calibrate_pw(std::span<const double> cal_scores,
                          const LabeledBatch& cal_labels,
                          const HeadTailPartition& partition, double alpha) {
  if (static_cast<int>(cal_scores.size()) != cal_labels.n())
    throw ConfigError("calibrate_pw: scores and labels disagree on n");
  std::vector<double> head, tail;
  for (int i = 0; i < cal_labels.n(); ++i) {
    const int y = cal_labels.labels[i];
    if (y < 0 || y >= partition.K())
      throw DataError("calibrate_pw: label out of range");
    (partition.is_head(y) ? head : tail).push_back(cal_scores[i]);
  }
  bool head_empty = false, tail_empty = false;
  auto map = ThresholdMap::make_per_group(
      partition.head_mask, conformal_quantile(head, alpha, &head_empty),
      conformal_quantile(tail, alpha, &tail_empty));
  if (head_empty) map.warnings.push_back("head group has no calibration samples");
  if (tail_empty) map.warnings.push_back("tail group has no calibration samples");
  return map;
}

ThresholdMap calibrate_classwise(std::span<const double> cal_scores,
                                 const LabeledBatch& cal_labels, int K,
                                 double alpha) {
  if (static_cast<int>(cal_scores.size()) != cal_labels.n())
    throw ConfigError("calibrate_classwise: scores and labels disagree on n");
  std::vector<std::vector<double>> by_class(K);
  for (int i = 0; i < cal_labels.n(); ++i) {
    const int y = cal_labels.labels[i];
    if (y < 0 || y >= K) throw DataError("calibrate_classwise: label out of range");
    by_class[y].push_back(cal_scores[i]);
  }
  // The order statistic overflows to +inf exactly when n_y < 1/alpha - 1,
  // which is the documented rare-class rule.
  std::vector<double> taus(K);
  for (int y = 0; y < K; ++y) taus[y] = conformal_quantile(by_class[y], alpha);
  return ThresholdMap::make_per_class(std::move(taus));
}

namespace {

// Plain empirical quantile (index ceil(level * n), clamped) used only to
// embed classes for clustering; no conformal correction wanted here.
double embedding_quantile(const std::vector<double>& sorted, double level) {
  const std::int64_t n = static_cast<std::int64_t>(sorted.size());
  const std::int64_t m =
      std::clamp<std::int64_t>(quantile_order_index(n, level), 1, n);
  return sorted[m - 1];
}

}  // namespace

ThresholdMap calibrate_cluster(std::span<const double> cal_scores,
                               const LabeledBatch& cal_labels, int K,
                               double alpha, int num_clusters, double gamma,
                               std::uint64_t seed) {
  if (static_cast<int>(cal_scores.size()) != cal_labels.n())
    throw ConfigError("calibrate_cluster: scores and labels disagree on n");
  if (num_clusters < 1) throw ConfigError("calibrate_cluster: M must be >= 1");
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ConfigError("calibrate_cluster: gamma must be in (0,1)");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0,1)");

  std::vector<int> cluster_part, threshold_part;
  stratified_split_indices(cal_labels.labels, K, gamma,
                           derive_seed(seed, stream::kCluster), cluster_part,
                           threshold_part);

  std::vector<std::vector<double>> cluster_scores(K);
  for (int i : cluster_part) cluster_scores[cal_labels.labels[i]].push_back(cal_scores[i]);

  const std::int64_t n_min = quantile_order_index(1, 1.0 / alpha);  // ceil(1/alpha)
  static constexpr double kLevels[] = {0.5, 0.6, 0.7, 0.8, 0.9};

  std::vector<int> embeddable;
  std::vector<std::vector<double>> points;
  for (int y = 0; y < K; ++y) {
    if (static_cast<std::int64_t>(cluster_scores[y].size()) < n_min) continue;
    auto& s = cluster_scores[y];
    std::sort(s.begin(), s.end());
    std::vector<double> e;
    e.reserve(std::size(kLevels));
    for (double level : kLevels) e.push_back(embedding_quantile(s, level));
    embeddable.push_back(y);
    points.push_back(std::move(e));
  }

  std::vector<int> cluster_of(K, -1);
  std::vector<std::string> warnings;
  int M = num_clusters;
  if (!embeddable.empty()) {
    if (M > static_cast<int>(embeddable.size())) {
      M = static_cast<int>(embeddable.size());
      warnings.push_back("reduced cluster count to " + std::to_string(M) +
                         " (only that many classes are clusterable)");
    }
    const auto km = kmeans(points, M, derive_seed(seed, stream::kCluster, 1));
    for (std::size_t j = 0; j < embeddable.size(); ++j)
      cluster_of[embeddable[j]] = km.assignment[j];
  } else {
    M = 0;
    warnings.push_back("all classes fell into the null cluster");
  }

  std::vector<std::vector<double>> per_cluster(M);
  std::vector<double> pooled;
  pooled.reserve(threshold_part.size());
  for (int i : threshold_part) {
    const int c = cluster_of[cal_labels.labels[i]];
    if (c >= 0) per_cluster[c].push_back(cal_scores[i]);
    pooled.push_back(cal_scores[i]);
  }

  std::vector<double> cluster_taus(M);
  for (int c = 0; c < M; ++c) {
    bool empty = false;
    cluster_taus[c] = conformal_quantile(per_cluster[c], alpha, &empty);
    if (empty)
      warnings.push_back("cluster " + std::to_string(c) +
                         " has no threshold-part samples");
  }
  bool pooled_empty = false;
  const double null_tau = conformal_quantile(pooled, alpha, &pooled_empty);
  if (pooled_empty) warnings.push_back("threshold part is empty");

  auto map = ThresholdMap::make_per_cluster(std::move(cluster_of),
                                            std::move(cluster_taus), null_tau);
  map.warnings = std::move(warnings);
  return map;
}

Rc3pState calibrate_rc3p(std::span<const double> cal_scores,
                         std::span<const int> cal_ranks,
                         const LabeledBatch& cal_labels, int K, double alpha,
                         KhatRule rule) {
  if (cal_scores.size() != cal_ranks.size() ||
      static_cast<int>(cal_scores.size()) != cal_labels.n())
    throw ConfigError("calibrate_rc3p: input sizes disagree");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0,1)");

  std::vector<std::vector<double>> scores_by_class(K);
  std::vector<std::vector<int>> ranks_by_class(K);
  for (int i = 0; i < cal_labels.n(); ++i) {
    const int y = cal_labels.labels[i];
    if (y < 0 || y >= K) throw DataError("calibrate_rc3p: label out of range");
    if (cal_ranks[i] < 1 || cal_ranks[i] > K)
      throw DataError("calibrate_rc3p: rank out of range");
    scores_by_class[y].push_back(cal_scores[i]);
    ranks_by_class[y].push_back(cal_ranks[i]);
  }

  Rc3pState state;
  state.K = K;
  state.khat.resize(K);
  state.tau.resize(K);
  state.err.assign(K, std::vector<double>(K, 0.0));

  for (int y = 0; y < K; ++y) {
    const auto& ranks = ranks_by_class[y];
    const int n_y = static_cast<int>(ranks.size());
    if (n_y == 0) {
      state.khat[y] = K;
      state.tau[y] = kInf;
      continue;
    }
    // Err_y^k = fraction of class-y samples whose true-label rank exceeds k.
    std::vector<int> rank_count(K + 2, 0);
    for (int r : ranks) ++rank_count[r];
    int above = n_y;
    for (int k = 1; k <= K; ++k) {
      above -= rank_count[k];
      state.err[y][k - 1] = static_cast<double>(above) / n_y;
    }

    int khat = K;
    if (rule == KhatRule::min_valid) {
      for (int k = 1; k <= K; ++k) {
        if (state.err[y][k - 1] < alpha) {
          khat = k;
          break;
        }
      }
    }
    state.khat[y] = khat;

    const double level = 1.0 - (alpha - state.err[y][khat - 1]);
    state.tau[y] = order_statistic_quantile(scores_by_class[y], level, nullptr);
  }
  return state;
}

bool PredictionSets::contains(int i, int y) const {
  const auto& s = sets[i];
  return std::binary_search(s.begin(), s.end(), y);
}

PredictionSets apply_thresholds(const ThresholdMap& thresholds,
                                const Matrix& scores,
                                const std::vector<int>* ranks,
                                const Rc3pState* rc3p) {
  const int n = scores.rows();
  const int K = scores.cols();
  if (thresholds.num_classes() != 0 && thresholds.num_classes() != K)
    throw ConfigError("threshold map built for K=" +
                      std::to_string(thresholds.num_classes()) +
                      " applied to K=" + std::to_string(K));
  if (rc3p != nullptr) {
    if (rc3p->K != K) throw ConfigError("rc3p state does not match K");
    if (ranks == nullptr) throw ConfigError("rc3p prediction needs ranks");
  }

  std::vector<double> tau(K);
  for (int y = 0; y < K; ++y)
    tau[y] = thresholds.kind() == ThresholdMap::Kind::global
                 ? thresholds.global_value()
                 : thresholds.resolve(y);

  PredictionSets out;
  out.K = K;
  out.sets.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto row = scores.row(i);
    auto& set = out.sets[i];
    for (int y = 0; y < K; ++y) {
      if (row[y] > tau[y]) continue;
      if (rc3p != nullptr &&
          (*ranks)[static_cast<std::size_t>(i) * K + y] > rc3p->khat[y])
        continue;
      set.push_back(y);
    }
  }
  return out;
}

PredictionSets predict(const ThresholdMap& thresholds,
                       const ProbMatrix& test_probs, const ScoreSpec& spec,
                       const ScoreContext& ctx, const Rc3pState* rc3p) {
  if (rc3p == nullptr) {
    const Matrix scores = candidate_scores(spec, test_probs, ctx);
    return apply_thresholds(thresholds, scores);
  }
  auto base = base_candidate_scores(spec, test_probs, ScoreMode::prediction);
  apply_regularization(spec, base, ctx);
  return apply_thresholds(thresholds, base.scores, &base.ranks, rc3p);
}

}  // namespace tailcp
