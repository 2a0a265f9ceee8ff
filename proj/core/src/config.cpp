#include <charconv>
#include <fstream>
#include <sstream>

#include "tailcp/experiment.hpp"

namespace tailcp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

}  // namespace

void apply_config_key(ExperimentConfig& c, const std::string& raw_key,
                      const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);

  if (key == "data") {
    if (value == "synthetic") {
      c.synthetic = true;
    } else if (value == "file") {
      c.synthetic = false;
      c.regenerate = false;  // an ingested dataset can only be re-split
    } else {
      throw ConfigError("data: expected synthetic|file");
    }
  } else if (key == "file") {
    c.file.path = value;
  } else if (key == "file_format") {
    if (value == "probs")
      c.file.format = PredictionFormat::probs;
    else if (value == "logits")
      c.file.format = PredictionFormat::logits;
    else
      throw ConfigError("file_format: expected probs|logits");
  } else if (key == "file_header") {
    c.file.header = to_bool(key, value);
  } else if (key == "profile") {
    if (value == "exponential")
      c.synth.kind = ProfileKind::exponential;
    else if (value == "pareto")
      c.synth.kind = ProfileKind::pareto;
    else if (value == "explicit")
      c.synth.kind = ProfileKind::explicit_counts;
    else
      throw ConfigError("profile: expected exponential|pareto|explicit");
  } else if (key == "k") {
    c.synth.K = static_cast<int>(to_int(key, value));
  } else if (key == "n_max") {
    c.synth.n_max = to_int(key, value);
  } else if (key == "mu") {
    c.synth.mu = to_double(key, value);
  } else if (key == "n_total") {
    c.synth.n_total = to_int(key, value);
  } else if (key == "rho") {
    c.synth.rho = to_double(key, value);
  } else if (key == "counts") {
    c.synth.counts.clear();
    for (const auto& item : split_list(value))
      c.synth.counts.push_back(to_int(key, item));
    c.synth.K = static_cast<int>(c.synth.counts.size());
  } else if (key == "signal") {
    c.synth.model.signal = to_double(key, value);
  } else if (key == "noise_sigma") {
    c.synth.model.noise_sigma = to_double(key, value);
  } else if (key == "temperature") {
    c.synth.model.temperature = to_double(key, value);
  } else if (key == "skew") {
    c.synth.model.skew = to_double(key, value);
  } else if (key == "regenerate") {
    c.regenerate = to_bool(key, value);
  } else if (key == "alpha") {
    c.alphas = to_doubles(key, value);
  } else if (key == "eta") {
    c.etas = to_doubles(key, value);
  } else if (key == "methods") {
    c.methods.clear();
    for (const auto& item : split_list(value))
      c.methods.push_back(method_from_string(item));
    if (c.methods.empty()) throw ConfigError("methods: empty list");
  } else if (key == "scores") {
    c.scores.clear();
    for (const auto& item : split_list(value))
      c.scores.push_back(score_from_string(item));
    if (c.scores.empty()) throw ConfigError("scores: empty list");
  } else if (key == "trials") {
    c.trials = static_cast<int>(to_int(key, value));
  } else if (key == "seed") {
    c.base_seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "frac_cal") {
    c.frac_cal = to_double(key, value);
  } else if (key == "stratified") {
    c.stratified = to_bool(key, value);
  } else if (key == "prior_source") {
    if (value == "calibration")
      c.prior_source = PriorSource::calibration;
    else if (value == "profile")
      c.prior_source = PriorSource::profile;
    else if (value == "file")
      c.prior_source = PriorSource::file;
    else
      throw ConfigError("prior_source: expected calibration|profile|file");
  } else if (key == "prior_file") {
    c.prior_path = value;
    c.prior_source = PriorSource::file;
  } else if (key == "smoothing") {
    c.smoothing = to_double(key, value);
  } else if (key == "tune_lambdas") {
    c.tuning.lambdas = to_doubles(key, value);
  } else if (key == "tune_krs") {
    c.tuning.k_rs.clear();
    for (const auto& item : split_list(value))
      c.tuning.k_rs.push_back(static_cast<int>(to_int(key, item)));
    if (c.tuning.k_rs.empty()) throw ConfigError("tune_krs: empty list");
  } else if (key == "tune_holdout") {
    c.tuning.holdout_frac = to_double(key, value);
  } else if (key == "tune_degenerate_cell") {
    c.tuning.degenerate_cell = to_bool(key, value);
  } else if (key == "cluster_m") {
    c.cluster_m = static_cast<int>(to_int(key, value));
  } else if (key == "cluster_gamma") {
    c.cluster_gamma = to_double(key, value);
  } else if (key == "raps_lambda") {
    c.raps_lambda = to_double(key, value);
  } else if (key == "raps_k") {
    c.raps_k = static_cast<int>(to_int(key, value));
  } else if (key == "randomized") {
    c.tacp_randomized = to_bool(key, value);
  } else if (key == "tie_noise") {
    c.tie_noise = to_double(key, value);
  } else if (key == "covgap_include_empty") {
    c.covgap_include_empty = to_bool(key, value);
  } else if (key == "out") {
    c.out_path = value;
  } else if (key == "format") {
    c.format = format_from_string(value);
  } else if (key == "workers") {
    c.workers = static_cast<int>(to_int(key, value));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);

  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key=value");
    try {
      apply_config_key(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

}  // namespace tailcp
