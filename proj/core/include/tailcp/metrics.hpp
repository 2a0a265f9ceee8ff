#ifndef TAILCP_METRICS_HPP
#define TAILCP_METRICS_HPP

#include <optional>
#include <vector>

#include "tailcp/calibrate.hpp"
#include "tailcp/partition.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

struct CoverageSize {
  double coverage = 0.0;  // fraction of samples whose set holds the true label
  double avg_size = 0.0;  // mean set cardinality
};

CoverageSize coverage_and_size(const PredictionSets& sets,
                               const LabeledBatch& labels);

// Conditional hit rates (x100) over head- and tail-labeled test samples.
// A group absent from the test data reports nullopt and leaves the gap
// undefined.
struct HeadTailCoverage {
  std::optional<double> cov_head;
  std::optional<double> cov_tail;
  std::optional<double> covgap_ht;
};

HeadTailCoverage head_tail_metrics(const PredictionSets& sets,
                                   const LabeledBatch& labels,
                                   const HeadTailPartition& partition);

// 100 x mean over classes of |per-class coverage - (1-alpha)|. Classes with
// no test samples are excluded by default (and counted); with include_empty
// they contribute |0 - (1-alpha)|.
struct ClassCoverageGap {
  std::optional<double> covgap;
  int classes_included = 0;
  int classes_empty = 0;
  std::vector<double> per_class_coverage;  // percent; NaN for empty classes
  std::vector<int> per_class_count;
};

ClassCoverageGap class_covgap(const PredictionSets& sets,
                              const LabeledBatch& labels, int K, double alpha,
                              bool include_empty = false);

// Everything the harness reports for one evaluated method. Percent-scaled
// fields per the CovGap / Cov-head conventions; avg_size in label units.
struct MetricsReport {
  double coverage = 0.0;  // percent
  double avg_size = 0.0;
  std::optional<double> cov_head;
  std::optional<double> cov_tail;
  std::optional<double> covgap_ht;
  std::optional<double> covgap;
  int covgap_classes_included = 0;
  int covgap_classes_empty = 0;
  std::vector<double> per_class_coverage;
  std::vector<int> per_class_count;
};

MetricsReport compute_report(const PredictionSets& sets,
                             const LabeledBatch& labels,
                             const HeadTailPartition* partition, int K,
                             double alpha, bool covgap_include_empty = false);

}  // namespace tailcp

#endif  // TAILCP_METRICS_HPP
