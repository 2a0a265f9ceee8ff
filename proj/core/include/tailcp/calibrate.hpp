#ifndef TAILCP_CALIBRATE_HPP
#define TAILCP_CALIBRATE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailcp/partition.hpp"
#include "tailcp/scores.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

// The ceil((n+1)(1-alpha))-th smallest of `scores` (no interpolation).
// Returns +infinity when that order statistic exceeds n, and for empty
// input (setting *empty_input when provided).
double conformal_quantile(std::span<const double> scores, double alpha,
                          bool* empty_input = nullptr);

// Order-statistic index m = ceil(count * level), guarded against the
// floating-point noise of products like 10 * 0.9.
std::int64_t quantile_order_index(std::int64_t count, double level);

// Calibrated acceptance thresholds, resolvable per class. Entries may be
// +infinity, which admits every label.
class ThresholdMap {
 public:
  enum class Kind { global, per_group, per_class, per_cluster };

  static ThresholdMap make_global(double tau);
  static ThresholdMap make_per_group(std::vector<std::uint8_t> head_mask,
                                     double tau_head, double tau_tail);
  static ThresholdMap make_per_class(std::vector<double> taus);
  static ThresholdMap make_per_cluster(std::vector<int> cluster_of,
                                       std::vector<double> cluster_taus,
                                       double null_tau);

  Kind kind() const { return kind_; }
  double resolve(int y) const;
  // Number of classes the map distinguishes; 0 for a global map.
  int num_classes() const;

  double global_value() const { return global_; }
  double head_value() const { return head_; }
  double tail_value() const { return tail_; }
  const std::vector<double>& per_class_values() const { return by_class_; }
  const std::vector<int>& cluster_assignment() const { return cluster_of_; }
  const std::vector<double>& cluster_values() const { return cluster_taus_; }
  double null_value() const { return null_tau_; }

  std::vector<std::string> warnings;

  friend bool operator==(const ThresholdMap&, const ThresholdMap&);

 private:
  Kind kind_ = Kind::global;
  double global_ = 0.0;
  std::vector<std::uint8_t> head_mask_;
  double head_ = 0.0, tail_ = 0.0;
  std::vector<double> by_class_;
  std::vector<int> cluster_of_;  // -1 = null cluster
  std::vector<double> cluster_taus_;
  double null_tau_ = 0.0;
};

ThresholdMap calibrate_standard(std::span<const double> cal_scores,
                                double alpha);

ThresholdMap calibrate_pw(std::span<const double> cal_scores,
                          const LabeledBatch& cal_labels,
                          const HeadTailPartition& partition, double alpha);

ThresholdMap calibrate_classwise(std::span<const double> cal_scores,
                                 const LabeledBatch& cal_labels, int K,
                                 double alpha);

// Clustered calibration: a gamma fraction of the calibration data (stratified)
// embeds each sufficiently-populated class as its score quantiles at levels
// {0.5,...,0.9} and k-means groups the classes; the remaining fraction
// supplies per-cluster thresholds. Classes with fewer than ceil(1/alpha)
// clustering samples fall into the null group, whose threshold pools every
// threshold-part sample.
ThresholdMap calibrate_cluster(std::span<const double> cal_scores,
                               const LabeledBatch& cal_labels, int K,
                               double alpha, int num_clusters, double gamma,
                               std::uint64_t seed);

enum class KhatRule {
  min_valid,  // smallest k with Err_y^k < alpha
  full_rank,  // k = K; disables the rank constraint
};

// Per-class rank-calibration state: top-k error tables, the chosen rank
// cutoffs and the rank-adjusted class thresholds.
struct Rc3pState {
  int K = 0;
  std::vector<int> khat;
  std::vector<double> tau;
  std::vector<std::vector<double>> err;  // err[y][k-1] = Err_y^k, k = 1..K

  ThresholdMap thresholds() const { return ThresholdMap::make_per_class(tau); }
};

Rc3pState calibrate_rc3p(std::span<const double> cal_scores,
                         std::span<const int> cal_ranks,
                         const LabeledBatch& cal_labels, int K, double alpha,
                         KhatRule rule = KhatRule::min_valid);

// Label sets per test sample; a label is present iff its score is at or
// below its resolved threshold (plus the rank constraint under rc3p).
struct PredictionSets {
  int K = 0;
  std::vector<std::vector<int>> sets;

  int n() const { return static_cast<int>(sets.size()); }
  bool contains(int i, int y) const;

  friend bool operator==(const PredictionSets&, const PredictionSets&) = default;
};

PredictionSets predict(const ThresholdMap& thresholds,
                       const ProbMatrix& test_probs, const ScoreSpec& spec,
                       const ScoreContext& ctx = {},
                       const Rc3pState* rc3p = nullptr);

// Thresholding of an already-computed score matrix; predict() is this plus
// candidate_scores().
PredictionSets apply_thresholds(const ThresholdMap& thresholds,
                                const Matrix& scores,
                                const std::vector<int>* ranks = nullptr,
                                const Rc3pState* rc3p = nullptr);

}  // namespace tailcp

#endif  // TAILCP_CALIBRATE_HPP
