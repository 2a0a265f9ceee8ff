// tailcp command line: synthetic data generation, multi-trial conformal
// experiments, coverage sweeps, hyperparameter tuning and report conversion.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tailcp/calibrate.hpp"
#include "tailcp/data.hpp"
#include "tailcp/experiment.hpp"
#include "tailcp/rng.hpp"
#include "tailcp/tune.hpp"

namespace {

using namespace tailcp;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs collected from flags
};

void add_override(CommonOpts& opts, const std::string& key,
                  const std::string& value) {
  opts.overrides.push_back(key + "=" + value);
}

// Flags mirror config keys; a flag given on the command line wins.
void attach_common_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "flat key=value config file");
  auto fwd = [&opts](const std::string& key) {
    return [&opts, key](const std::string& v) { add_override(opts, key, v); };
  };
  cmd->add_option_function<std::string>("--alpha", fwd("alpha"),
                                        "miscoverage level list, e.g. 0.1,0.05");
  cmd->add_option_function<std::string>("--eta", fwd("eta"),
                                        "head-tail mass threshold list");
  cmd->add_option_function<std::string>("--methods", fwd("methods"),
                                        "standard,pw,classwise,cluster,rc3p,tacp,stacp");
  cmd->add_option_function<std::string>("--scores", fwd("scores"),
                                        "aps,lac,topk,raps");
  cmd->add_option_function<std::string>("--trials", fwd("trials"), "trial count");
  cmd->add_option_function<std::string>("--seed", fwd("seed"), "base seed");
  cmd->add_option_function<std::string>("--out", fwd("out"), "output path");
  cmd->add_option_function<std::string>("--format", fwd("format"), "csv|json");
  cmd->add_option_function<std::string>("--workers", fwd("workers"),
                                        "worker threads (0 = auto)");
  cmd->add_option_function<std::string>("--file", fwd("file"),
                                        "prediction file to ingest");
  cmd->add_flag_function("--logits",
                         [&opts](std::int64_t) {
                           add_override(opts, "file_format", "logits");
                         },
                         "ingested rows are logits");
  cmd->add_flag_function("--probs",
                         [&opts](std::int64_t) {
                           add_override(opts, "file_format", "probs");
                         },
                         "ingested rows are probabilities (default)");
  cmd->add_flag_function("--header",
                         [&opts](std::int64_t) {
                           add_override(opts, "file_header", "true");
                         },
                         "skip one header line when ingesting");
}

ExperimentConfig build_config(const CommonOpts& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) config = parse_config_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    apply_config_key(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.overrides.empty() &&
      std::any_of(opts.overrides.begin(), opts.overrides.end(),
                  [](const std::string& kv) { return kv.rfind("file=", 0) == 0; }))
    apply_config_key(config, "data", "file");
  return config;
}

// Key=value description of a synthetic source, readable back via --config.
void write_description(const std::string& path, const ExperimentConfig& config,
                       const ClassProfile& profile) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write description: " + path);
  switch (profile.kind) {
    case ProfileKind::exponential:
      out << "profile = exponential\n"
          << "k = " << config.synth.K << "\n"
          << "n_max = " << config.synth.n_max << "\n"
          << "mu = " << config.synth.mu << "\n";
      break;
    case ProfileKind::pareto:
      out << "profile = pareto\n"
          << "k = " << config.synth.K << "\n"
          << "n_total = " << config.synth.n_total << "\n"
          << "rho = " << config.synth.rho << "\n";
      break;
    case ProfileKind::explicit_counts: {
      out << "profile = explicit\n"
          << "counts = ";
      for (std::size_t i = 0; i < profile.counts.size(); ++i)
        out << (i ? "," : "") << profile.counts[i];
      out << "\n";
      break;
    }
  }
  out << "signal = " << config.synth.model.signal << "\n"
      << "noise_sigma = " << config.synth.model.noise_sigma << "\n"
      << "temperature = " << config.synth.model.temperature << "\n"
      << "skew = " << config.synth.model.skew << "\n"
      << "seed = " << config.base_seed << "\n";
  if (!out) throw DataError("write failed: " + path);
}

int cmd_generate(const CommonOpts& opts, const std::string& describe_path) {
  auto config = build_config(opts);
  if (config.out_path.empty())
    throw ConfigError("generate needs --out for the prediction file");
  const auto profile = config.synth.profile();
  const auto data = synth_generate(profile, config.synth.model,
                                   derive_seed(config.base_seed, stream::kTrial, 0));
  save_predictions(config.out_path, data);
  if (!describe_path.empty()) write_description(describe_path, config, profile);
  std::cout << "wrote " << data.batch.n() << " samples, K=" << data.probs.cols()
            << " to " << config.out_path << "\n";
  return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
  auto config = build_config(opts);
  const auto result = run(config);

  if (config.out_path.empty()) config.out_path = "records." + to_string(config.format);
  if (config.format == OutputFormat::csv)
    write_records_csv(config.out_path, result.records);
  else
    write_run_json(config.out_path, result);

  std::cout << result.records.size() << " records ("
            << result.failures.size() << " failed cells) -> "
            << config.out_path << "\n";
  for (const auto& s : result.summary) {
    std::printf("%-9s %-5s a=%-5g eta=%-4g cov=%6.2f±%-5.2f size=%7.2f±%-6.2f",
                to_string(s.method).c_str(), to_string(s.score).c_str(),
                s.alpha, s.eta, s.coverage.mean, s.coverage.stddev,
                s.avg_size.mean, s.avg_size.stddev);
    if (s.covgap_ht.n > 0)
      std::printf(" covgap_ht=%5.2f±%-4.2f", s.covgap_ht.mean, s.covgap_ht.stddev);
    if (s.covgap.n > 0)
      std::printf(" covgap=%5.2f±%-4.2f", s.covgap.mean, s.covgap.stddev);
    std::printf("\n");
  }
  for (const auto& f : result.failures)
    std::cerr << "failed: " << to_string(f.method) << "/" << to_string(f.score)
              << " alpha=" << f.alpha << " eta=" << f.eta << ": " << f.message
              << "\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_sweep(const CommonOpts& opts, double a_min, double a_max, double a_step) {
  auto config = build_config(opts);
  if (a_min > 0.0) {
    config.alphas.clear();
    for (double a = a_min; a <= a_max + 1e-12; a += a_step)
      config.alphas.push_back(a);
  }
  const auto rows = sweep_coverage_curve(config);
  if (config.out_path.empty()) config.out_path = "curve.csv";
  write_curve_csv(config.out_path, rows);
  std::cout << rows.size() << " curve rows -> " << config.out_path << "\n";
  return kExitOk;
}

int cmd_tune(const CommonOpts& opts, const std::string& method_name) {
  auto config = build_config(opts);
  const RegKind reg =
      method_name == "stacp" ? RegKind::stacp : RegKind::tacp;

  // One dataset, trial-0 semantics.
  Dataset data;
  ClassProfile profile;
  if (config.synthetic) {
    profile = config.synth.profile();
    data = synth_generate(profile, config.synth.model,
                          derive_seed(config.base_seed, stream::kTrial, 0));
  } else {
    data = load_predictions(config.file.path, config.file.format,
                            config.file.header);
  }
  const int K = data.probs.cols();
  const auto parts = split(data, config.frac_cal,
                           derive_seed(config.base_seed, stream::kTrial, 0),
                           config.stratified);
  const auto prior =
      config.prior_source == PriorSource::profile
          ? prior_from_values(profile_prior(profile))
          : estimate_prior(parts.cal.batch, K, config.smoothing);
  const double alpha = config.alphas.front();
  const auto partition = head_tail_partition(prior, config.etas.front());

  ScoreContext ctx;
  if (reg == RegKind::tacp)
    ctx.partition = &partition;
  else
    ctx.prior = &prior;

  std::printf("%-5s %10s %4s %12s\n", "score", "lambda", "k_r", "objective");
  for (BaseScore s : config.scores) {
    ScoreSpec spec;
    spec.base = s;
    spec.raps_lambda = config.raps_lambda;
    spec.raps_k = config.raps_k > 0 ? config.raps_k : (K >= 500 ? 8 : 5);
    spec.tie_noise = config.tie_noise;
    spec.seed = derive_seed(config.base_seed, stream::kScoreSpec);

    TuneGrid grid = default_grid(s, K < 500 ? GridScale::small : GridScale::large, reg);
    if (!config.tuning.lambdas.empty()) grid.lambdas = config.tuning.lambdas;
    if (!config.tuning.k_rs.empty()) grid.k_rs = config.tuning.k_rs;
    if (config.tuning.degenerate_cell) grid = ensure_degenerate_cell(grid, K);

    const auto result =
        tune(grid, parts.cal.probs, parts.cal.batch, alpha, spec, reg, ctx,
             derive_seed(config.base_seed, stream::kTune),
             config.tuning.holdout_frac);
    for (const auto& cell : result.table)
      std::printf("%-5s %10g %4d %12.6f\n", to_string(s).c_str(), cell.lambda,
                  cell.k_r, cell.objective);
    std::printf("%-5s best: lambda=%g k_r=%d objective=%.6f (unregularized %.6f)\n",
                to_string(s).c_str(), result.best_lambda, result.best_k_r,
                result.objective_value, result.standard_objective);
  }
  return kExitOk;
}

int cmd_report(const std::string& in_path, const std::string& format_name,
               const std::string& out_path) {
  const auto records = read_records_csv(in_path);
  const auto format = format_from_string(format_name);
  std::string out = out_path;
  if (out.empty()) out = "report." + format_name;
  if (format == OutputFormat::csv) {
    write_records_csv(out, records);
  } else {
    RunResult result;
    result.records = records;
    result.summary = summarize(records);
    write_run_json(out, result);
  }
  std::cout << records.size() << " records -> " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal prediction harness for long-tail classification"};
  app.require_subcommand(1);

  CommonOpts gen_opts, run_opts, sweep_opts, tune_opts;

  auto* gen = app.add_subcommand("generate", "write a synthetic prediction file");
  attach_common_flags(gen, gen_opts);
  std::string describe_path;
  gen->add_option("--describe", describe_path,
                  "also write a key=value description of the source");

  auto* runc = app.add_subcommand("run", "run a multi-trial experiment");
  attach_common_flags(runc, run_opts);

  auto* sweep = app.add_subcommand("sweep", "coverage curve over alpha");
  attach_common_flags(sweep, sweep_opts);
  double a_min = 0.0, a_max = 0.2, a_step = 0.01;
  sweep->add_option("--alpha-min", a_min, "sweep start (overrides --alpha)");
  sweep->add_option("--alpha-max", a_max, "sweep end");
  sweep->add_option("--alpha-step", a_step, "sweep step");

  auto* tunec = app.add_subcommand("tune", "grid-search lambda and k_r");
  attach_common_flags(tunec, tune_opts);
  std::string tune_method = "tacp";
  tunec->add_option("--method", tune_method, "tacp|stacp");

  auto* report = app.add_subcommand("report", "convert a records file");
  std::string rep_in, rep_format = "json", rep_out;
  report->add_option("--in", rep_in, "records CSV")->required();
  report->add_option("--format", rep_format, "csv|json");
  report->add_option("--out", rep_out, "output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_opts, describe_path);
    if (runc->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, a_min, a_max, a_step);
    if (tunec->parsed()) return cmd_tune(tune_opts, tune_method);
    if (report->parsed()) return cmd_report(rep_in, rep_format, rep_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
