#include "tailcp/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tailcp/rng.hpp"

namespace tailcp {

namespace {

void check_label(std::span<const double> row, int y) {
  if (y < 0 || y >= static_cast<int>(row.size()))
    throw std::out_of_range("label " + std::to_string(y) +
                            " out of range for K=" + std::to_string(row.size()));
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

int rank(std::span<const double> row, int y) {
  check_label(row, y);
  const double py = row[y];
  int r = 0;
  for (double v : row) r += v >= py;
  return r;
}

std::vector<int> rank_row(std::span<const double> row) {
  const int K = static_cast<int>(row.size());
  std::vector<int> idx(K);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return row[a] > row[b]; });
  std::vector<int> ranks(K);
  int pos = 0;
  while (pos < K) {
    int end = pos;
    while (end + 1 < K && row[idx[end + 1]] == row[idx[pos]]) ++end;
    for (int j = pos; j <= end; ++j) ranks[idx[j]] = end + 1;  // shared larger rank
    pos = end + 1;
  }
  return ranks;
}

std::vector<int> true_label_ranks(const ProbMatrix& probs,
                                  const LabeledBatch& batch) {
  std::vector<int> out(batch.n());
  for (int i = 0; i < batch.n(); ++i)
    out[i] = rank(probs.row(i), batch.labels[i]);
  return out;
}

double score_lac(std::span<const double> row, int y) {
  check_label(row, y);
  return 1.0 - row[y];
}

double score_aps(std::span<const double> row, int y, double u) {
  check_label(row, y);
  const double py = row[y];
  double above = 0.0;
  int tied = 0;
  for (double v : row) {
    if (v > py)
      above += v;
    else if (v == py)
      ++tied;
  }
  // Tied labels occupy adjacent sorted positions; the mass ranked strictly
  // above y includes the tied copies that precede it.
  return above + (tied - 1) * py + u * py;
}

double score_topk(std::span<const double> row, int y, double u) {
  return static_cast<double>(rank(row, y)) + u;
}

double score_raps(std::span<const double> row, int y, double u,
                  double raps_lambda, int raps_k) {
  const double aps = score_aps(row, y, u);
  const int r = rank(row, y);
  return aps + raps_lambda * relu(static_cast<double>(r - raps_k));
}

double score_tacp(double base_score, int rank, bool is_head, double lambda,
                  int k_r, double u_pen) {
  if (!is_head) return base_score;
  return base_score + lambda * relu(static_cast<double>(rank - k_r) + u_pen);
}

double score_stacp(double base_score, int rank, double prior_y, double lambda,
                   int k_r) {
  if (prior_y < 0.0 || prior_y > 1.0)
    throw ConfigError("score_stacp: prior weight must be in [0,1]");
  return base_score + lambda * prior_y * relu(static_cast<double>(rank - k_r));
}

namespace {

struct SampleDraws {
  double u_base;
  double u_pen;
  double u_tie;
};

SampleDraws sample_draws(const ScoreSpec& spec, ScoreMode mode, int i) {
  const std::uint64_t salt =
      mode == ScoreMode::calibration ? stream::kScoreCal : stream::kScorePred;
  Rng rng(derive_seed(derive_seed(spec.seed, salt), static_cast<std::uint64_t>(i)));
  SampleDraws d;
  d.u_base = rng.uniform01();
  d.u_pen = rng.uniform01();
  d.u_tie = rng.uniform01();
  return d;
}

// Base score of one label given the pre-sorted row structure.
struct RowView {
  std::span<const double> row;
  std::vector<int> ranks;
  std::vector<double> cum;  // cum[r] = mass of the r largest sorted entries

  explicit RowView(std::span<const double> r) : row(r), ranks(rank_row(r)) {
    const int K = static_cast<int>(r.size());
    std::vector<double> sorted(r.begin(), r.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    cum.resize(K + 1, 0.0);
    for (int j = 0; j < K; ++j) cum[j + 1] = cum[j] + sorted[j];
  }

  double base(const ScoreSpec& spec, int y, double u) const {
    switch (spec.base) {
      case BaseScore::lac:
        return 1.0 - row[y];
      case BaseScore::topk:
        return static_cast<double>(ranks[y]) + u;
      case BaseScore::aps:
        return cum[ranks[y] - 1] + u * row[y];
      case BaseScore::raps:
        return cum[ranks[y] - 1] + u * row[y] +
               spec.raps_lambda *
                   relu(static_cast<double>(ranks[y] - spec.raps_k));
    }
    throw ConfigError("unknown base score");
  }
};

void validate_spec(const ScoreSpec& spec) {
  if (spec.reg_k < 1) throw ConfigError("regularization rank k_r must be >= 1");
  if (spec.reg_lambda < 0.0) throw ConfigError("regularization lambda must be >= 0");
  if (spec.base == BaseScore::raps && spec.raps_k < 1)
    throw ConfigError("raps_k must be >= 1");
  if (spec.tie_noise < 0.0) throw ConfigError("tie_noise must be >= 0");
}

}  // namespace

std::vector<double> regularization_weights(const ScoreSpec& spec, int K,
                                           const ScoreContext& ctx) {
  std::vector<double> w(K, 0.0);
  if (spec.reg == RegKind::none) return w;
  if (spec.reg == RegKind::tacp) {
    if (ctx.partition == nullptr)
      throw ConfigError("tacp scoring needs a head-tail partition");
    if (ctx.partition->K() != K)
      throw ConfigError("partition size does not match K");
    for (int k = 0; k < K; ++k) w[k] = ctx.partition->is_head(k) ? 1.0 : 0.0;
    return w;
  }
  if (ctx.prior == nullptr)
    throw ConfigError("stacp scoring needs a class prior");
  if (ctx.prior->K() != K) throw ConfigError("prior size does not match K");
  return ctx.prior->p;
}

BaseScoreBatch base_label_scores(const ScoreSpec& spec, const ProbMatrix& probs,
                                 const LabeledBatch& batch, ScoreMode mode) {
  validate_spec(spec);
  if (probs.rows() != batch.n())
    throw ConfigError("probability matrix and labels disagree on n");
  BaseScoreBatch out;
  out.scores.resize(batch.n());
  out.ranks.resize(batch.n());
  out.u_pen.resize(batch.n());
  for (int i = 0; i < batch.n(); ++i) {
    const auto row = probs.row(i);
    const int y = batch.labels[i];
    if (y < 0 || y >= probs.cols()) throw DataError("label out of range");
    const auto d = sample_draws(spec, mode, i);
    const RowView view(row);
    out.scores[i] = view.base(spec, y, d.u_base) + spec.tie_noise * d.u_tie;
    out.ranks[i] = view.ranks[y];
    out.u_pen[i] = d.u_pen;
  }
  return out;
}

BaseScoreMatrix base_candidate_scores(const ScoreSpec& spec,
                                      const ProbMatrix& probs,
                                      ScoreMode mode) {
  validate_spec(spec);
  const int n = probs.rows();
  const int K = probs.cols();
  BaseScoreMatrix out;
  out.scores = Matrix(n, K);
  out.ranks.resize(static_cast<std::size_t>(n) * K);
  out.u_pen.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto d = sample_draws(spec, mode, i);
    const RowView view(probs.row(i));
    auto dst = out.scores.row(i);
    for (int y = 0; y < K; ++y) {
      dst[y] = view.base(spec, y, d.u_base) + spec.tie_noise * d.u_tie;
      out.ranks[static_cast<std::size_t>(i) * K + y] = view.ranks[y];
    }
    out.u_pen[i] = d.u_pen;
  }
  return out;
}

void apply_regularization(const ScoreSpec& spec, BaseScoreBatch& base,
                          const LabeledBatch& batch, int K,
                          const ScoreContext& ctx) {
  if (spec.reg == RegKind::none) return;
  const auto w = regularization_weights(spec, K, ctx);
  for (int i = 0; i < batch.n(); ++i) {
    const int y = batch.labels[i];
    const double u_pen = (spec.reg == RegKind::tacp && spec.randomized)
                             ? base.u_pen[i]
                             : 0.0;
    if (spec.reg == RegKind::tacp)
      base.scores[i] = score_tacp(base.scores[i], base.ranks[i], w[y] != 0.0,
                                  spec.reg_lambda, spec.reg_k, u_pen);
    else
      base.scores[i] = score_stacp(base.scores[i], base.ranks[i], w[y],
                                   spec.reg_lambda, spec.reg_k);
  }
}

void apply_regularization(const ScoreSpec& spec, BaseScoreMatrix& base,
                          const ScoreContext& ctx) {
  if (spec.reg == RegKind::none) return;
  const int K = base.scores.cols();
  const auto w = regularization_weights(spec, K, ctx);
  for (int i = 0; i < base.scores.rows(); ++i) {
    auto row = base.scores.row(i);
    const double u_pen = (spec.reg == RegKind::tacp && spec.randomized)
                             ? base.u_pen[i]
                             : 0.0;
    for (int y = 0; y < K; ++y) {
      const int r = base.rank_at(i, y);
      if (spec.reg == RegKind::tacp)
        row[y] = score_tacp(row[y], r, w[y] != 0.0, spec.reg_lambda, spec.reg_k,
                            u_pen);
      else
        row[y] = score_stacp(row[y], r, w[y], spec.reg_lambda, spec.reg_k);
    }
  }
}

std::vector<double> calibration_scores(const ScoreSpec& spec,
                                       const ProbMatrix& probs,
                                       const LabeledBatch& batch,
                                       const ScoreContext& ctx) {
  auto base = base_label_scores(spec, probs, batch, ScoreMode::calibration);
  apply_regularization(spec, base, batch, probs.cols(), ctx);
  return std::move(base.scores);
}

Matrix candidate_scores(const ScoreSpec& spec, const ProbMatrix& probs,
                        const ScoreContext& ctx) {
  auto base = base_candidate_scores(spec, probs, ScoreMode::prediction);
  apply_regularization(spec, base, ctx);
  return std::move(base.scores);
}

}  // namespace tailcp
