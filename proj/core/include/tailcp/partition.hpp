#ifndef TAILCP_PARTITION_HPP
#define TAILCP_PARTITION_HPP

#include <cstdint>
#include <vector>

#include "tailcp/types.hpp"

namespace tailcp {

// Per-class prior probabilities; entries >= 0, sum 1.
struct ClassPrior {
  std::vector<double> p;

  int K() const { return static_cast<int>(p.size()); }
};

// Head/tail membership of the label space: the head group is the smallest
// set of classes whose cumulative prior reaches eta.
struct HeadTailPartition {
  std::vector<std::uint8_t> head_mask;
  double eta = 0.0;

  int K() const { return static_cast<int>(head_mask.size()); }
  bool is_head(int y) const { return head_mask[y] != 0; }
  int head_count() const;
};

// p_k = (count_k + smoothing) / (n + K * smoothing).
ClassPrior estimate_prior(const LabeledBatch& batch, int K,
                          double smoothing = 0.0);

ClassPrior prior_from_values(std::vector<double> values);

// Greedy head selection: classes in descending prior order (ties broken by
// ascending index) until the cumulative mass reaches eta. The greedy prefix
// attains the minimum-cardinality set with that mass.
HeadTailPartition head_tail_partition(const ClassPrior& prior, double eta);

}  // namespace tailcp

#endif  // TAILCP_PARTITION_HPP
