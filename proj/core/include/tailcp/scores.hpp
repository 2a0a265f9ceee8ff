#ifndef TAILCP_SCORES_HPP
#define TAILCP_SCORES_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "tailcp/partition.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

enum class BaseScore { aps, lac, topk, raps };
enum class RegKind { none, tacp, stacp };

// Identity of a non-conformity score: the base score plus an optional
// rank regularization. RAPS constants are ignored unless base == raps.
//
// Randomization: each sample i owns a stream derived from (seed, mode, i)
// and draws, in order, u_base (APS/TOPK/RAPS tie-breaking), u_pen (the
// randomized tacp penalty) and u_tie (tie_noise). All three are shared
// across the candidate labels of that sample, which keeps prediction sets
// nested in the threshold.
struct ScoreSpec {
  BaseScore base = BaseScore::lac;
  double raps_lambda = 0.01;
  int raps_k = 5;

  RegKind reg = RegKind::none;
  double reg_lambda = 0.0;
  int reg_k = 1;
  bool randomized = false;  // tacp only: penalty uses (rank - k_r + u)^+

  // Scale of a per-sample uniform added to the base score; makes an
  // otherwise discrete score almost surely tie-free without changing
  // rankings. 0 disables.
  double tie_noise = 0.0;

  std::uint64_t seed = 0;
};

// Rank of label y in row: |{y' : row[y'] >= row[y]}|. Rank 1 is the most
// probable label; tied labels share the larger rank.
int rank(std::span<const double> row, int y);

// Ranks of every label of one row.
std::vector<int> rank_row(std::span<const double> row);

// Rank of the true label per sample.
std::vector<int> true_label_ranks(const ProbMatrix& probs,
                                  const LabeledBatch& batch);

double score_lac(std::span<const double> row, int y);

// Mass of labels ranked strictly above y, plus u * row[y].
double score_aps(std::span<const double> row, int y, double u);

double score_topk(std::span<const double> row, int y, double u);

double score_raps(std::span<const double> row, int y, double u,
                  double raps_lambda, int raps_k);

// base + lambda * [is_head] * (rank - k_r + u_pen)^+. u_pen is 0 in the
// deterministic form and a fresh uniform in the randomized form.
double score_tacp(double base_score, int rank, bool is_head, double lambda,
                  int k_r, double u_pen = 0.0);

// base + lambda * prior_y * (rank - k_r)^+.
double score_stacp(double base_score, int rank, double prior_y, double lambda,
                   int k_r);

// Inputs the regularized scores need beyond the probability row.
struct ScoreContext {
  const HeadTailPartition* partition = nullptr;  // tacp
  const ClassPrior* prior = nullptr;             // stacp
};

// Base score and true-label rank per calibration sample, regularization not
// yet applied. Lets hyperparameter search re-penalize cheaply.
struct BaseScoreBatch {
  std::vector<double> scores;
  std::vector<int> ranks;
  std::vector<double> u_pen;  // per-sample penalty uniforms (randomized tacp)
};

// Base score and rank for every (sample, candidate label) pair.
struct BaseScoreMatrix {
  Matrix scores;
  std::vector<int> ranks;  // row-major N x K
  std::vector<double> u_pen;

  int rank_at(int i, int y) const {
    return ranks[static_cast<std::size_t>(i) * scores.cols() + y];
  }
};

enum class ScoreMode { calibration, prediction };

// Base score and rank at each sample's own label. Calibration mode draws
// the calibration u-stream; prediction mode draws the same stream the full
// candidate matrix uses, so a sample's true-label score here equals its
// entry there.
BaseScoreBatch base_label_scores(const ScoreSpec& spec, const ProbMatrix& probs,
                                 const LabeledBatch& batch,
                                 ScoreMode mode = ScoreMode::calibration);

BaseScoreMatrix base_candidate_scores(const ScoreSpec& spec,
                                      const ProbMatrix& probs,
                                      ScoreMode mode = ScoreMode::prediction);

// Regularization weight for label y: [y in head] for tacp, prior[y] for
// stacp, 0 otherwise. Throws ConfigError when the context lacks what the
// spec's regularizer needs.
std::vector<double> regularization_weights(const ScoreSpec& spec, int K,
                                           const ScoreContext& ctx);

// In-place regularization of precomputed base scores. candidate_scores()
// and calibration_scores() route through these, so a caller that reuses a
// base matrix across several (lambda, k_r) settings gets bit-identical
// results to the one-shot drivers.
void apply_regularization(const ScoreSpec& spec, BaseScoreMatrix& base,
                          const ScoreContext& ctx);
void apply_regularization(const ScoreSpec& spec, BaseScoreBatch& base,
                          const LabeledBatch& batch, int K,
                          const ScoreContext& ctx);

// One score per (sample, true label); the calibration side of a conformal
// calibrator. Deterministic given spec.seed.
std::vector<double> calibration_scores(const ScoreSpec& spec,
                                       const ProbMatrix& probs,
                                       const LabeledBatch& batch,
                                       const ScoreContext& ctx = {});

// N x K scores over all candidate labels; the prediction side.
Matrix candidate_scores(const ScoreSpec& spec, const ProbMatrix& probs,
                        const ScoreContext& ctx = {});

}  // namespace tailcp

#endif  // TAILCP_SCORES_HPP
