#include "tailcp/tune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailcp/calibrate.hpp"
#include "tailcp/data.hpp"
#include "tailcp/rng.hpp"

namespace tailcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TuneGrid default_grid(BaseScore base, GridScale scale, RegKind reg) {
  TuneGrid g;
  const int k_max = scale == GridScale::small ? 10 : 15;
  g.k_rs.resize(k_max);
  std::iota(g.k_rs.begin(), g.k_rs.end(), 1);

  if (reg == RegKind::tacp) {
    g.objective = TuneObjective::covgap_ht;
    if (base == BaseScore::topk)
      g.lambdas = {1, 2, 3, 4, 5};
    else
      g.lambdas = {0.001, 0.01, 0.02, 0.05, 0.1, 0.5, 1};
  } else if (reg == RegKind::stacp) {
    g.objective = TuneObjective::covgap;
    if (base == BaseScore::aps || base == BaseScore::lac)
      g.lambdas = {0.001, 0.01, 0.1, 0.2, 0.3, 0.5, 0.8, 1};
    else
      g.lambdas = {1, 8, 10, 50, 100, 300, 500, 800};
  } else {
    throw ConfigError("default_grid: regularizer must be tacp or stacp");
  }
  return g;
}

TuneGrid ensure_degenerate_cell(TuneGrid grid, int K) {
  const bool has = std::any_of(grid.k_rs.begin(), grid.k_rs.end(),
                               [K](int k) { return k >= K; });
  if (!has) grid.k_rs.push_back(K);
  return grid;
}

namespace {

double penalty(RegKind reg, double weight, double lambda, int k_r, int rank) {
  if (reg == RegKind::tacp)
    return weight != 0.0 && rank > k_r ? lambda * (rank - k_r) : 0.0;
  return rank > k_r ? lambda * weight * (rank - k_r) : 0.0;
}

struct EvalData {
  std::vector<double> base;    // prediction-mode base score at the true label
  std::vector<int> rank;       // true-label rank
  std::vector<int> label;
};

// The tuning objectives depend only on whether each evaluation sample's own
// label enters its set, so a single score per sample suffices.
double objective_on(const EvalData& eval, double tau, RegKind reg,
                    const std::vector<double>& weights, double lambda, int k_r,
                    TuneObjective objective,
                    const HeadTailPartition* partition, int K, double alpha) {
  const int n = static_cast<int>(eval.base.size());
  if (objective == TuneObjective::covgap_ht) {
    std::int64_t nh = 0, nt = 0, hh = 0, ht = 0;
    for (int i = 0; i < n; ++i) {
      const int y = eval.label[i];
      const double s = eval.base[i] + penalty(reg, weights[y], lambda, k_r,
                                              eval.rank[i]);
      const bool hit = s <= tau;
      if (partition->is_head(y)) {
        ++nh;
        hh += hit;
      } else {
        ++nt;
        ht += hit;
      }
    }
    if (nh == 0 || nt == 0) return kInf;
    return std::abs(100.0 * static_cast<double>(hh) / nh -
                    100.0 * static_cast<double>(ht) / nt);
  }

  std::vector<std::int64_t> count(K, 0), hit(K, 0);
  for (int i = 0; i < n; ++i) {
    const int y = eval.label[i];
    const double s =
        eval.base[i] + penalty(reg, weights[y], lambda, k_r, eval.rank[i]);
    ++count[y];
    hit[y] += s <= tau;
  }
  double dev = 0.0;
  int included = 0;
  for (int y = 0; y < K; ++y) {
    if (count[y] == 0) continue;
    dev += std::abs(static_cast<double>(hit[y]) / count[y] - (1.0 - alpha));
    ++included;
  }
  if (included == 0) return kInf;
  return 100.0 * dev / included;
}

}  // namespace

TuneResult tune(const TuneGrid& grid, const ProbMatrix& cal_probs,
                const LabeledBatch& cal_labels, double alpha,
                const ScoreSpec& base_spec, RegKind reg,
                const ScoreContext& ctx, std::uint64_t seed,
                double holdout_frac) {
  if (grid.lambdas.empty() || grid.k_rs.empty())
    throw ConfigError("tune: empty grid");
  for (double l : grid.lambdas)
    if (l < 0.0) throw ConfigError("tune: lambda must be >= 0");
  for (int k : grid.k_rs)
    if (k < 1) throw ConfigError("tune: k_r must be >= 1");
  if (holdout_frac < 0.0 || holdout_frac >= 1.0)
    throw ConfigError("tune: holdout_frac must be in [0,1)");
  if (cal_labels.n() == 0) throw ConfigError("tune: empty calibration batch");
  if (reg == RegKind::none) throw ConfigError("tune: nothing to tune");
  if (grid.objective == TuneObjective::covgap_ht && ctx.partition == nullptr)
    throw ConfigError("tune: covgap_ht objective needs a head-tail partition");
  if (grid.objective == TuneObjective::covgap && ctx.prior == nullptr)
    throw ConfigError("tune: covgap objective needs a class prior");

  const int K = cal_probs.cols();
  ScoreSpec spec = base_spec;
  spec.reg = reg;
  const auto weights = regularization_weights(spec, K, ctx);

  // Fit/eval portions. With no holdout both views are the full set, which
  // keeps the fit-side u stream identical to the final calibration pass.
  ProbMatrix fit_probs, eval_probs;
  LabeledBatch fit_labels, eval_labels;
  const Dataset full{cal_labels, cal_probs};
  if (holdout_frac > 0.0) {
    auto parts = split(full, 1.0 - holdout_frac,
                       derive_seed(seed, stream::kTune), /*stratified=*/true);
    fit_probs = std::move(parts.cal.probs);
    fit_labels = std::move(parts.cal.batch);
    eval_probs = std::move(parts.test.probs);
    eval_labels = std::move(parts.test.batch);
  } else {
    fit_probs = cal_probs;
    fit_labels = cal_labels;
    eval_probs = cal_probs;
    eval_labels = cal_labels;
  }

  const auto fit =
      base_label_scores(base_spec, fit_probs, fit_labels, ScoreMode::calibration);
  const auto eval_base =
      base_label_scores(base_spec, eval_probs, eval_labels, ScoreMode::prediction);
  EvalData eval{eval_base.scores, eval_base.ranks, eval_labels.labels};

  const int n_fit = fit_labels.n();
  std::vector<double> cell_scores(n_fit);

  auto evaluate = [&](double lambda, int k_r) {
    for (int i = 0; i < n_fit; ++i)
      cell_scores[i] =
          fit.scores[i] + penalty(reg, weights[fit_labels.labels[i]], lambda,
                                  k_r, fit.ranks[i]);
    const double tau = conformal_quantile(cell_scores, alpha);
    return objective_on(eval, tau, reg, weights, lambda, k_r, grid.objective,
                        ctx.partition, K, alpha);
  };

  TuneResult result;
  result.standard_objective = evaluate(0.0, K);  // penalty identically zero

  bool first = true;
  for (double lambda : grid.lambdas) {
    for (int k_r : grid.k_rs) {
      const double obj = evaluate(lambda, k_r);
      result.table.push_back({lambda, k_r, obj});
      const bool better =
          first || obj < result.objective_value ||
          (obj == result.objective_value &&
           (lambda < result.best_lambda ||
            (lambda == result.best_lambda && k_r < result.best_k_r)));
      if (better) {
        result.best_lambda = lambda;
        result.best_k_r = k_r;
        result.objective_value = obj;
        first = false;
      }
    }
  }
  return result;
}

}  // namespace tailcp
