#ifndef TAILCP_EXPERIMENT_HPP
#define TAILCP_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailcp/calibrate.hpp"
#include "tailcp/data.hpp"
#include "tailcp/metrics.hpp"
#include "tailcp/scores.hpp"
#include "tailcp/tune.hpp"
#include "tailcp/types.hpp"

namespace tailcp {

enum class Method { standard, pw, classwise, cluster, rc3p, tacp, stacp };
enum class OutputFormat { csv, json };
enum class PriorSource { calibration, profile, file };

std::string to_string(Method m);
std::string to_string(BaseScore s);
std::string to_string(OutputFormat f);
Method method_from_string(const std::string& s);
BaseScore score_from_string(const std::string& s);
OutputFormat format_from_string(const std::string& s);

struct SyntheticSource {
  ProfileKind kind = ProfileKind::exponential;
  int K = 20;
  std::int64_t n_max = 1000;          // exponential
  double mu = 50.0;                   // exponential imbalance factor
  std::int64_t n_total = 10000;       // pareto
  double rho = 0.6;                   // pareto power
  std::vector<std::int64_t> counts;   // explicit
  SynthModelSpec model;

  ClassProfile profile() const;
};

struct FileSource {
  std::string path;
  PredictionFormat format = PredictionFormat::probs;
  bool header = false;
};

struct TuneOptions {
  // Empty vectors mean "use the published grid for the score family".
  std::vector<double> lambdas;
  std::vector<int> k_rs;
  double holdout_frac = 0.0;
  // Keep a k_r >= K cell in the grid so the tuned objective can never
  // exceed the unregularized objective on the tuning data.
  bool degenerate_cell = true;
};

struct ExperimentConfig {
  bool synthetic = true;
  SyntheticSource synth;
  FileSource file;
  // Fresh data per trial (synthetic) versus one dataset re-split per trial.
  bool regenerate = true;

  std::vector<double> alphas = {0.1};
  std::vector<double> etas = {0.5};
  std::vector<Method> methods = {Method::standard};
  std::vector<BaseScore> scores = {BaseScore::lac};

  int trials = 1;
  std::uint64_t base_seed = 1;
  double frac_cal = 0.5;
  bool stratified = true;

  PriorSource prior_source = PriorSource::calibration;
  std::string prior_path;
  double smoothing = 0.0;

  TuneOptions tuning;

  int cluster_m = 4;
  double cluster_gamma = 0.8;

  // raps_k = 0 selects by scale: 8 when K >= 500, else 5.
  double raps_lambda = 0.01;
  int raps_k = 0;

  bool tacp_randomized = false;
  double tie_noise = 0.0;
  bool covgap_include_empty = false;

  std::string out_path;
  OutputFormat format = OutputFormat::csv;
  int workers = 0;  // 0 = available parallelism (TAILCP_WORKERS overrides)
};

// One evaluated (method, score, alpha, eta) cell of one trial.
struct TrialRecord {
  Method method = Method::standard;
  BaseScore score = BaseScore::lac;
  double alpha = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 0;

  double coverage = 0.0;  // percent
  double avg_size = 0.0;
  std::optional<double> cov_head;
  std::optional<double> cov_tail;
  std::optional<double> covgap_ht;
  std::optional<double> covgap;
  std::optional<double> lambda;  // tacp/stacp only
  std::optional<int> k_r;

  // Not serialized into the record table.
  std::optional<double> threshold;  // global-threshold methods
  MetricsReport detail;
};

struct CellFailure {
  Method method;
  BaseScore score;
  double alpha;
  double eta;
  std::uint64_t seed;
  std::string message;
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int n = 0;
};

struct SummaryRow {
  Method method;
  BaseScore score;
  double alpha;
  double eta;
  int trials = 0;
  Stat coverage, avg_size, cov_head, cov_tail, covgap_ht, covgap;
};

struct RunResult {
  std::vector<TrialRecord> records;
  std::vector<CellFailure> failures;
  std::vector<SummaryRow> summary;
};

// Executes trials x methods x scores x alphas x etas. Per trial: re-derive
// the seed, regenerate or re-split the data, estimate priors, tune where the
// method asks for it, calibrate, predict, score the metrics. Failures stay
// confined to their cell. Deterministic end to end given base_seed.
RunResult run(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

struct CurveRow {
  Method method;
  BaseScore score;
  double alpha;
  double eta;
  double coverage;  // percent, mean over trials
  std::optional<double> cov_head;
  std::optional<double> cov_tail;
  double avg_size;
  std::optional<double> threshold;
};

// Coverage-versus-alpha table (the plot-ready curve data); one row per
// (method, score, alpha, eta), averaged over trials.
std::vector<CurveRow> sweep_coverage_curve(const ExperimentConfig& config);

// ---- report files ----

void write_records_csv(const std::string& path,
                       const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(const std::string& path);

void write_run_json(const std::string& path, const RunResult& result);

void write_curve_csv(const std::string& path,
                     const std::vector<CurveRow>& rows);

// ---- configuration ----

// Flat key=value file; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_key(ExperimentConfig& config, const std::string& key,
                      const std::string& value);

}  // namespace tailcp

#endif  // TAILCP_EXPERIMENT_HPP
