#ifndef TAILCP_TUNE_HPP
#define TAILCP_TUNE_HPP

#include <cstdint>
#include <vector>

#include "tailcp/scores.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

enum class TuneObjective {
  covgap_ht,  // head-tail coverage gap; needs a partition
  covgap,     // class-conditional coverage gap; pairs with stacp
};

enum class GridScale { small, large };

struct TuneGrid {
  std::vector<double> lambdas;
  std::vector<int> k_rs;
  TuneObjective objective = TuneObjective::covgap_ht;
};

struct TuneCell {
  double lambda = 0.0;
  int k_r = 1;
  double objective = 0.0;  // +inf when undefined on the evaluation data
};

struct TuneResult {
  double best_lambda = 0.0;
  int best_k_r = 1;
  double objective_value = 0.0;
  // Objective of the unregularized score through the identical pipeline;
  // any k_r >= K grid cell reproduces it exactly.
  double standard_objective = 0.0;
  std::vector<TuneCell> table;
};

// Candidate grids: k_r 1..10 (small) or 1..15 (large); lambda by base score
// and regularizer family.
TuneGrid default_grid(BaseScore base, GridScale scale, RegKind reg);

// Appends K to the k_r grid when every existing k_r is smaller. The added
// cell degenerates to the unregularized score, so the selected objective
// can never exceed the unregularized objective on the tuning data.
TuneGrid ensure_degenerate_cell(TuneGrid grid, int K);

// Evaluates every (lambda, k_r) cell: thresholds from the fit portion,
// objective on the evaluation portion. holdout_frac = 0 reuses the full
// calibration set for both; > 0 carves out a seeded stratified holdout.
// Ties break toward smaller lambda, then smaller k_r.
TuneResult tune(const TuneGrid& grid, const ProbMatrix& cal_probs,
                const LabeledBatch& cal_labels, double alpha,
                const ScoreSpec& base_spec, RegKind reg,
                const ScoreContext& ctx, std::uint64_t seed,
                double holdout_frac = 0.0);

}  // namespace tailcp

#endif  // TAILCP_TUNE_HPP
