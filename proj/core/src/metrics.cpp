#include "tailcp/metrics.hpp"

#include <cmath>
#include <limits>

namespace tailcp {

CoverageSize coverage_and_size(const PredictionSets& sets,
                               const LabeledBatch& labels) {
  if (sets.n() != labels.n())
    throw ConfigError("coverage_and_size: sets and labels disagree on n");
  if (sets.n() == 0) throw ConfigError("coverage_and_size: empty input");
  std::int64_t hits = 0, size = 0;
  for (int i = 0; i < sets.n(); ++i) {
    hits += sets.contains(i, labels.labels[i]);
    size += static_cast<std::int64_t>(sets.sets[i].size());
  }
  const double n = static_cast<double>(sets.n());
  return {static_cast<double>(hits) / n, static_cast<double>(size) / n};
}

HeadTailCoverage head_tail_metrics(const PredictionSets& sets,
                                   const LabeledBatch& labels,
                                   const HeadTailPartition& partition) {
  if (sets.n() != labels.n())
    throw ConfigError("head_tail_metrics: sets and labels disagree on n");
  std::int64_t n_head = 0, n_tail = 0, hit_head = 0, hit_tail = 0;
  for (int i = 0; i < sets.n(); ++i) {
    const int y = labels.labels[i];
    if (y < 0 || y >= partition.K())
      throw DataError("head_tail_metrics: label out of range");
    const bool hit = sets.contains(i, y);
    if (partition.is_head(y)) {
      ++n_head;
      hit_head += hit;
    } else {
      ++n_tail;
      hit_tail += hit;
    }
  }
  HeadTailCoverage out;
  if (n_head > 0)
    out.cov_head = 100.0 * static_cast<double>(hit_head) / n_head;
  if (n_tail > 0)
    out.cov_tail = 100.0 * static_cast<double>(hit_tail) / n_tail;
  if (out.cov_head && out.cov_tail)
    out.covgap_ht = std::abs(*out.cov_head - *out.cov_tail);
  return out;
}

ClassCoverageGap class_covgap(const PredictionSets& sets,
                              const LabeledBatch& labels, int K, double alpha,
                              bool include_empty) {
  if (sets.n() != labels.n())
    throw ConfigError("class_covgap: sets and labels disagree on n");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0,1)");

  std::vector<std::int64_t> count(K, 0), hit(K, 0);
  for (int i = 0; i < sets.n(); ++i) {
    const int y = labels.labels[i];
    if (y < 0 || y >= K) throw DataError("class_covgap: label out of range");
    ++count[y];
    hit[y] += sets.contains(i, y);
  }

  ClassCoverageGap out;
  out.per_class_coverage.resize(K);
  out.per_class_count.resize(K);
  const double target = 1.0 - alpha;
  double dev_sum = 0.0;
  int included = 0;
  for (int y = 0; y < K; ++y) {
    out.per_class_count[y] = static_cast<int>(count[y]);
    if (count[y] == 0) {
      out.per_class_coverage[y] = std::numeric_limits<double>::quiet_NaN();
      ++out.classes_empty;
      if (include_empty) {
        dev_sum += target;  // empty class counted as coverage 0
        ++included;
      }
      continue;
    }
    const double cov = static_cast<double>(hit[y]) / count[y];
    out.per_class_coverage[y] = 100.0 * cov;
    dev_sum += std::abs(cov - target);
    ++included;
  }
  out.classes_included = included;
  if (included > 0) out.covgap = 100.0 * dev_sum / included;
  return out;
}

MetricsReport compute_report(const PredictionSets& sets,
                             const LabeledBatch& labels,
                             const HeadTailPartition* partition, int K,
                             double alpha, bool covgap_include_empty) {
  MetricsReport r;
  const auto cs = coverage_and_size(sets, labels);
  r.coverage = 100.0 * cs.coverage;
  r.avg_size = cs.avg_size;
  if (partition != nullptr) {
    const auto ht = head_tail_metrics(sets, labels, *partition);
    r.cov_head = ht.cov_head;
    r.cov_tail = ht.cov_tail;
    r.covgap_ht = ht.covgap_ht;
  }
  auto cg = class_covgap(sets, labels, K, alpha, covgap_include_empty);
  r.covgap = cg.covgap;
  r.covgap_classes_included = cg.classes_included;
  r.covgap_classes_empty = cg.classes_empty;
  r.per_class_coverage = std::move(cg.per_class_coverage);
  r.per_class_count = std::move(cg.per_class_count);
  return r;
}

}  // namespace tailcp
