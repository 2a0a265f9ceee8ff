#include "tailcp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "tailcp/rng.hpp"

namespace tailcp {

namespace {
inline constexpr std::uint64_t kSharedDataStream = 0x5348415245;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::standard: return "standard";
    case Method::pw: return "pw";
    case Method::classwise: return "classwise";
    case Method::cluster: return "cluster";
    case Method::rc3p: return "rc3p";
    case Method::tacp: return "tacp";
    case Method::stacp: return "stacp";
  }
  return "?";
}

std::string to_string(BaseScore s) {
  switch (s) {
    case BaseScore::aps: return "aps";
    case BaseScore::lac: return "lac";
    case BaseScore::topk: return "topk";
    case BaseScore::raps: return "raps";
  }
  return "?";
}

std::string to_string(OutputFormat f) {
  return f == OutputFormat::csv ? "csv" : "json";
}

Method method_from_string(const std::string& s) {
  if (s == "standard") return Method::standard;
  if (s == "pw") return Method::pw;
  if (s == "classwise") return Method::classwise;
  if (s == "cluster") return Method::cluster;
  if (s == "rc3p") return Method::rc3p;
  if (s == "tacp") return Method::tacp;
  if (s == "stacp") return Method::stacp;
  throw ConfigError("unknown method: " + s);
}

BaseScore score_from_string(const std::string& s) {
  if (s == "aps") return BaseScore::aps;
  if (s == "lac") return BaseScore::lac;
  if (s == "topk") return BaseScore::topk;
  if (s == "raps") return BaseScore::raps;
  throw ConfigError("unknown score: " + s);
}

OutputFormat format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("unknown output format: " + s);
}

ClassProfile SyntheticSource::profile() const {
  switch (kind) {
    case ProfileKind::exponential:
      return exponential_profile(K, n_max, mu);
    case ProfileKind::pareto:
      return pareto_profile(K, n_total, rho);
    case ProfileKind::explicit_counts:
      return explicit_profile(counts);
  }
  throw ConfigError("unknown profile kind");
}

namespace {

void validate(const ExperimentConfig& c) {
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.alphas.empty() || c.etas.empty() || c.methods.empty() ||
      c.scores.empty())
    throw ConfigError("alpha/eta/method/score lists must be nonempty");
  for (double a : c.alphas)
    if (a <= 0.0 || a >= 1.0) throw ConfigError("alpha must be in (0,1)");
  for (double e : c.etas)
    if (e <= 0.0 || e > 1.0) throw ConfigError("eta must be in (0,1]");
  if (c.frac_cal <= 0.0 || c.frac_cal >= 1.0)
    throw ConfigError("frac_cal must be in (0,1)");
  if (!c.synthetic && c.file.path.empty())
    throw ConfigError("file data source needs a path");
  if (c.prior_source == PriorSource::file && c.prior_path.empty())
    throw ConfigError("prior_source=file needs prior_file");
  if (c.prior_source == PriorSource::profile && !c.synthetic)
    throw ConfigError("prior_source=profile needs synthetic data");
}

struct CellKey {
  Method method;
  BaseScore score;
  double alpha;
  double eta;
};

int auto_raps_k(int K) { return K >= 500 ? 8 : 5; }

GridScale scale_for(int K) { return K < 500 ? GridScale::small : GridScale::large; }

ClassPrior load_prior_file(const std::string& path, int K) {
  std::vector<double> v;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prior file: " + path);
  double x = 0.0;
  while (in >> x) {
    v.push_back(x);
    if (in.peek() == ',') in.get();
  }
  if (static_cast<int>(v.size()) != K)
    throw DataError("prior file holds " + std::to_string(v.size()) +
                    " values, expected " + std::to_string(K));
  return prior_from_values(std::move(v));
}

struct TrialSlot {
  std::vector<std::optional<TrialRecord>> records;  // per cell
  std::vector<CellFailure> failures;
};

}  // namespace

RunResult run(const ExperimentConfig& config) {
  validate(config);

  // Cell grid in configuration order.
  std::vector<CellKey> cells;
  for (Method m : config.methods)
    for (BaseScore s : config.scores)
      for (double a : config.alphas)
        for (double e : config.etas) cells.push_back({m, s, a, e});

  // Data shared by every trial in re-split mode.
  ClassProfile profile;
  Dataset shared;
  if (config.synthetic) {
    profile = config.synth.profile();
    if (!config.regenerate)
      shared = synth_generate(profile, config.synth.model,
                              derive_seed(config.base_seed, kSharedDataStream));
  } else {
    shared = load_predictions(config.file.path, config.file.format,
                              config.file.header);
  }
  const int K = config.synthetic ? config.synth.K : shared.probs.cols();

  std::optional<ClassPrior> fixed_prior;
  if (config.prior_source == PriorSource::profile)
    fixed_prior = prior_from_values(profile_prior(profile));
  else if (config.prior_source == PriorSource::file)
    fixed_prior = load_prior_file(config.prior_path, K);

  const bool regenerate = config.synthetic && config.regenerate;

  auto run_trial = [&](int t, TrialSlot& slot) {
    const std::uint64_t seed_t =
        derive_seed(config.base_seed, stream::kTrial, static_cast<std::uint64_t>(t));
    slot.records.assign(cells.size(), std::nullopt);

    auto fail_all = [&](const std::string& msg) {
      for (const auto& cell : cells)
        slot.failures.push_back(
            {cell.method, cell.score, cell.alpha, cell.eta, seed_t, msg});
    };

    SplitResult parts;
    ClassPrior prior;
    try {
      Dataset fresh;
      const Dataset* source = &shared;
      if (regenerate) {
        fresh = synth_generate(profile, config.synth.model, seed_t);
        source = &fresh;
      }
      parts = split(*source, config.frac_cal, seed_t, config.stratified);
      prior = fixed_prior ? *fixed_prior
                          : estimate_prior(parts.cal.batch, K, config.smoothing);
    } catch (const Error& e) {
      fail_all(e.what());
      return;
    }

    std::vector<HeadTailPartition> partitions;
    partitions.reserve(config.etas.size());
    for (double eta : config.etas)
      partitions.push_back(head_tail_partition(prior, eta));

    // Per-score precomputation shared across methods and levels.
    struct ScoreData {
      ScoreSpec spec;
      BaseScoreBatch cal;
      BaseScoreMatrix test;
    };
    std::vector<ScoreData> per_score(config.scores.size());
    for (std::size_t si = 0; si < config.scores.size(); ++si) {
      auto& sd = per_score[si];
      sd.spec.base = config.scores[si];
      sd.spec.raps_lambda = config.raps_lambda;
      sd.spec.raps_k = config.raps_k > 0 ? config.raps_k : auto_raps_k(K);
      sd.spec.tie_noise = config.tie_noise;
      sd.spec.seed = derive_seed(seed_t, stream::kScoreSpec);
      sd.cal = base_label_scores(sd.spec, parts.cal.probs, parts.cal.batch,
                                 ScoreMode::calibration);
      sd.test = base_candidate_scores(sd.spec, parts.test.probs,
                                      ScoreMode::prediction);
    }

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const auto& cell = cells[ci];
      const std::size_t si = static_cast<std::size_t>(
          std::find(config.scores.begin(), config.scores.end(), cell.score) -
          config.scores.begin());
      const std::size_t ei = static_cast<std::size_t>(
          std::find(config.etas.begin(), config.etas.end(), cell.eta) -
          config.etas.begin());
      const auto& sd = per_score[si];
      const auto& partition = partitions[ei];

      try {
        TrialRecord rec;
        rec.method = cell.method;
        rec.score = cell.score;
        rec.alpha = cell.alpha;
        rec.eta = cell.eta;
        rec.seed = seed_t;

        PredictionSets sets;
        switch (cell.method) {
          case Method::standard: {
            const auto map = calibrate_standard(sd.cal.scores, cell.alpha);
            rec.threshold = map.global_value();
            sets = apply_thresholds(map, sd.test.scores);
            break;
          }
          case Method::pw: {
            const auto map = calibrate_pw(sd.cal.scores, parts.cal.batch,
                                          partition, cell.alpha);
            sets = apply_thresholds(map, sd.test.scores);
            break;
          }
          case Method::classwise: {
            const auto map = calibrate_classwise(sd.cal.scores, parts.cal.batch,
                                                 K, cell.alpha);
            sets = apply_thresholds(map, sd.test.scores);
            break;
          }
          case Method::cluster: {
            const auto map = calibrate_cluster(
                sd.cal.scores, parts.cal.batch, K, cell.alpha, config.cluster_m,
                config.cluster_gamma, derive_seed(seed_t, stream::kCluster));
            sets = apply_thresholds(map, sd.test.scores);
            break;
          }
          case Method::rc3p: {
            const auto state =
                calibrate_rc3p(sd.cal.scores, sd.cal.ranks, parts.cal.batch, K,
                               cell.alpha);
            sets = apply_thresholds(state.thresholds(), sd.test.scores,
                                    &sd.test.ranks, &state);
            break;
          }
          case Method::tacp:
          case Method::stacp: {
            const RegKind reg = cell.method == Method::tacp ? RegKind::tacp
                                                            : RegKind::stacp;
            ScoreContext ctx;
            if (reg == RegKind::tacp)
              ctx.partition = &partition;
            else
              ctx.prior = &prior;

            TuneGrid grid = default_grid(cell.score, scale_for(K), reg);
            if (!config.tuning.lambdas.empty())
              grid.lambdas = config.tuning.lambdas;
            if (!config.tuning.k_rs.empty()) grid.k_rs = config.tuning.k_rs;
            if (config.tuning.degenerate_cell)
              grid = ensure_degenerate_cell(std::move(grid), K);

            const auto tuned = tune(grid, parts.cal.probs, parts.cal.batch,
                                    cell.alpha, sd.spec, reg, ctx,
                                    derive_seed(seed_t, stream::kTune),
                                    config.tuning.holdout_frac);

            ScoreSpec spec = sd.spec;
            spec.reg = reg;
            spec.reg_lambda = tuned.best_lambda;
            spec.reg_k = tuned.best_k_r;
            spec.randomized = reg == RegKind::tacp && config.tacp_randomized;

            auto cal = sd.cal;
            apply_regularization(spec, cal, parts.cal.batch, K, ctx);
            const auto map = calibrate_standard(cal.scores, cell.alpha);
            rec.threshold = map.global_value();

            auto test = sd.test;
            apply_regularization(spec, test, ctx);
            sets = apply_thresholds(map, test.scores);

            rec.lambda = tuned.best_lambda;
            rec.k_r = tuned.best_k_r;
            break;
          }
        }

        rec.detail = compute_report(sets, parts.test.batch, &partition, K,
                                    cell.alpha, config.covgap_include_empty);
        rec.coverage = rec.detail.coverage;
        rec.avg_size = rec.detail.avg_size;
        rec.cov_head = rec.detail.cov_head;
        rec.cov_tail = rec.detail.cov_tail;
        rec.covgap_ht = rec.detail.covgap_ht;
        rec.covgap = rec.detail.covgap;
        slot.records[ci] = std::move(rec);
      } catch (const Error& e) {
        slot.failures.push_back(
            {cell.method, cell.score, cell.alpha, cell.eta, seed_t, e.what()});
      }
    }
  };

  // Trials are independent; run them on a small pool. Records land in
  // preallocated slots so scheduling never changes the output.
  std::vector<TrialSlot> slots(config.trials);
  int workers = config.workers;
  if (workers <= 0) {
    if (const char* env = std::getenv("TAILCP_WORKERS")) workers = std::atoi(env);
  }
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, config.trials);

  if (workers == 1) {
    for (int t = 0; t < config.trials; ++t) run_trial(t, slots[t]);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int t = next.fetch_add(1);
          if (t >= config.trials) return;
          run_trial(t, slots[t]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  RunResult result;
  result.records.reserve(cells.size() * config.trials);
  for (std::size_t ci = 0; ci < cells.size(); ++ci)
    for (int t = 0; t < config.trials; ++t)
      if (slots[t].records[ci]) result.records.push_back(*slots[t].records[ci]);
  for (int t = 0; t < config.trials; ++t)
    result.failures.insert(result.failures.end(), slots[t].failures.begin(),
                           slots[t].failures.end());
  result.summary = summarize(result.records);
  return result;
}

namespace {

struct Welford {
  double sum = 0.0;
  double sumsq = 0.0;
  int n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  void add(const std::optional<double>& x) {
    if (x) add(*x);
  }
  Stat stat() const {
    Stat s;
    s.n = n;
    if (n == 0) return s;
    s.mean = sum / n;
    if (n > 1) {
      const double var = (sumsq - sum * sum / n) / (n - 1);
      s.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return s;
  }
};

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  struct Acc {
    SummaryRow row;
    Welford coverage, avg_size, cov_head, cov_tail, covgap_ht, covgap;
  };
  std::vector<Acc> accs;
  auto find = [&](const TrialRecord& r) -> Acc& {
    for (auto& a : accs) {
      if (a.row.method == r.method && a.row.score == r.score &&
          a.row.alpha == r.alpha && a.row.eta == r.eta)
        return a;
    }
    accs.emplace_back();
    auto& a = accs.back();
    a.row.method = r.method;
    a.row.score = r.score;
    a.row.alpha = r.alpha;
    a.row.eta = r.eta;
    return a;
  };

  for (const auto& r : records) {
    auto& a = find(r);
    ++a.row.trials;
    a.coverage.add(r.coverage);
    a.avg_size.add(r.avg_size);
    a.cov_head.add(r.cov_head);
    a.cov_tail.add(r.cov_tail);
    a.covgap_ht.add(r.covgap_ht);
    a.covgap.add(r.covgap);
  }

  std::vector<SummaryRow> rows;
  rows.reserve(accs.size());
  for (auto& a : accs) {
    a.row.coverage = a.coverage.stat();
    a.row.avg_size = a.avg_size.stat();
    a.row.cov_head = a.cov_head.stat();
    a.row.cov_tail = a.cov_tail.stat();
    a.row.covgap_ht = a.covgap_ht.stat();
    a.row.covgap = a.covgap.stat();
    rows.push_back(a.row);
  }
  return rows;
}

std::vector<CurveRow> sweep_coverage_curve(const ExperimentConfig& config) {
  const RunResult res = run(config);

  std::vector<CurveRow> rows;
  for (Method m : config.methods) {
    for (BaseScore s : config.scores) {
      for (double a : config.alphas) {
        for (double e : config.etas) {
          Welford cov, head, tail, size, tau;
          for (const auto& r : res.records) {
            if (r.method != m || r.score != s || r.alpha != a || r.eta != e)
              continue;
            cov.add(r.coverage);
            size.add(r.avg_size);
            head.add(r.cov_head);
            tail.add(r.cov_tail);
            tau.add(r.threshold);
          }
          if (cov.n == 0) continue;  // every trial of the cell failed
          CurveRow row{m, s, a, e, cov.stat().mean, std::nullopt, std::nullopt,
                       size.stat().mean, std::nullopt};
          if (head.n > 0) row.cov_head = head.stat().mean;
          if (tail.n > 0) row.cov_tail = tail.stat().mean;
          if (tau.n > 0) row.threshold = tau.stat().mean;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

}  // namespace tailcp
