#ifndef TAILCP_DATA_HPP
#define TAILCP_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tailcp/types.hpp"

namespace tailcp {

enum class ProfileKind { exponential, pareto, explicit_counts };

// Per-class sample counts of a long-tail label distribution.
struct ClassProfile {
  int K = 0;
  std::vector<std::int64_t> counts;
  ProfileKind kind = ProfileKind::explicit_counts;

  std::int64_t total() const;
};

// Synthetic classifier description. Each sample of class y draws logits
//   l_j = noise_sigma * N(0,1)          for every class j,
//   l_y += signal * (counts[y] / max_count)^skew,
// and the probability row is softmax(l / temperature). skew > 0 makes the
// classifier weaker on rare classes, the way a model trained on long-tail
// data behaves; skew = 0 gives a class-uniform boost.
struct SynthModelSpec {
  double signal = 2.0;
  double noise_sigma = 1.0;
  double temperature = 1.0;
  double skew = 0.5;
};

// counts[k] = round(n_max * mu^(-k/(K-1))), clamped to >= 1.
// Throws DataError if mu < 1 or the smallest class rounds below 1.
ClassProfile exponential_profile(int K, std::int64_t n_max, double mu);

// Class priors p_k proportional to (k+1)^(-rho); counts apportioned over
// n_total by largest remainder, every class kept >= 1.
ClassProfile pareto_profile(int K, std::int64_t n_total, double rho);

ClassProfile explicit_profile(std::vector<std::int64_t> counts);

// Exact per-class prior implied by a profile (counts / total).
std::vector<double> profile_prior(const ClassProfile& profile);

// Emits exactly counts[k] samples of class k, shuffled. Deterministic in
// `seed`; per-sample logit streams are indexed by sample position, so the
// output is independent of evaluation order.
Dataset synth_generate(const ClassProfile& profile, const SynthModelSpec& model,
                       std::uint64_t seed);

enum class PredictionFormat { probs, logits };

// Reads "label, v_1, ..., v_K" rows. For logits each row is passed through a
// softmax; for probs the row sum must be within 1e-3 of 1 and the row is
// renormalized. Parse failures report the offending line number.
Dataset load_predictions(const std::string& path, PredictionFormat format,
                         bool skip_header = false);
Dataset load_predictions(std::istream& in, PredictionFormat format,
                         bool skip_header = false,
                         const std::string& name = "<stream>");

void save_predictions(const std::string& path, const Dataset& data);

struct SplitResult {
  Dataset cal;
  Dataset test;
  std::vector<int> cal_indices;
  std::vector<int> test_indices;
};

// Disjoint, exhaustive calibration/test split. Stratified mode shuffles
// within each class and rounds frac_cal * n_k per class; classes with a
// single sample go to calibration. Throws DataError when a side is empty.
SplitResult split(const Dataset& data, double frac_cal, std::uint64_t seed,
                  bool stratified);

// Index-level stratified split used by split() and by cluster calibration:
// first part receives round(frac * n_k) of each class (all of a 1-sample
// class), preserving per-class proportions.
void stratified_split_indices(std::span<const int> labels, int K, double frac,
                              std::uint64_t seed, std::vector<int>& first,
                              std::vector<int>& second);

}  // namespace tailcp

#endif  // TAILCP_DATA_HPP
