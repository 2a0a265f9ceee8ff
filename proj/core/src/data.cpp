#include "tailcp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tailcp/rng.hpp"

namespace tailcp {

void validate_prob_matrix(const Matrix& m, double tol) {
  for (int i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (double v : m.row(i)) {
      if (v < 0.0 || v > 1.0)
        throw DataError("probability entry out of [0,1] in row " +
                        std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol)
      throw DataError("row " + std::to_string(i) + " sums to " +
                      std::to_string(sum) + ", not 1");
  }
}

std::int64_t ClassProfile::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ClassProfile exponential_profile(int K, std::int64_t n_max, double mu) {
  if (K < 2) throw DataError("exponential profile needs K >= 2");
  if (n_max < 1) throw DataError("exponential profile needs n_max >= 1");
  if (mu < 1.0)
    throw DataError("invalid profile: imbalance factor mu must be >= 1");
  if (std::llround(static_cast<double>(n_max) / mu) < 1)
    throw DataError("invalid profile: smallest class count rounds below 1");

  ClassProfile p;
  p.K = K;
  p.kind = ProfileKind::exponential;
  p.counts.resize(K);
  for (int k = 0; k < K; ++k) {
    const double decay = std::pow(mu, -static_cast<double>(k) / (K - 1));
    p.counts[k] = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(n_max) * decay));
  }
  p.counts[0] = n_max;
  return p;
}

ClassProfile pareto_profile(int K, std::int64_t n_total, double rho) {
  if (K < 2) throw DataError("pareto profile needs K >= 2");
  if (n_total < K) throw DataError("pareto profile needs n_total >= K");
  if (rho < 0.0) throw DataError("pareto power rho must be >= 0");

  std::vector<double> weight(K);
  double norm = 0.0;
  for (int k = 0; k < K; ++k) {
    weight[k] = std::pow(static_cast<double>(k + 1), -rho);
    norm += weight[k];
  }

  // Largest-remainder apportionment; remainder ties go to the smaller index.
  ClassProfile p;
  p.K = K;
  p.kind = ProfileKind::pareto;
  p.counts.resize(K);
  std::vector<std::pair<double, int>> remainder(K);
  std::int64_t assigned = 0;
  for (int k = 0; k < K; ++k) {
    const double quota = static_cast<double>(n_total) * weight[k] / norm;
    p.counts[k] = static_cast<std::int64_t>(std::floor(quota + 1e-12));
    remainder[k] = {quota - static_cast<double>(p.counts[k]), k};
    assigned += p.counts[k];
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::int64_t left = n_total - assigned;
  for (std::int64_t i = 0; left > 0; ++i, --left) ++p.counts[remainder[i].second];
  for (std::int64_t i = K - 1; left < 0; --i, ++left)
    --p.counts[remainder[i].second];

  // Keep every class populated, taking from the last of the largest classes
  // so the counts stay non-increasing.
  for (int k = 0; k < K; ++k) {
    while (p.counts[k] < 1) {
      const auto big = std::max_element(p.counts.rbegin(), p.counts.rend());
      if (*big <= 1) throw DataError("cannot apportion counts >= 1");
      --*big;
      ++p.counts[k];
    }
  }
  return p;
}

ClassProfile explicit_profile(std::vector<std::int64_t> counts) {
  if (counts.empty()) throw DataError("explicit profile needs counts");
  for (auto c : counts)
    if (c < 1) throw DataError("explicit profile counts must be >= 1");
  ClassProfile p;
  p.K = static_cast<int>(counts.size());
  p.counts = std::move(counts);
  p.kind = ProfileKind::explicit_counts;
  return p;
}

std::vector<double> profile_prior(const ClassProfile& profile) {
  std::vector<double> prior(profile.K);
  const double total = static_cast<double>(profile.total());
  for (int k = 0; k < profile.K; ++k)
    prior[k] = static_cast<double>(profile.counts[k]) / total;
  return prior;
}

namespace {

void softmax_inplace(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

}  // namespace

Dataset synth_generate(const ClassProfile& profile, const SynthModelSpec& model,
                       std::uint64_t seed) {
  if (profile.K < 1 || profile.counts.empty())
    throw DataError("synth_generate: empty profile");
  if (model.temperature <= 0.0)
    throw DataError("synth_generate: temperature must be > 0");
  if (model.signal < 0.0 || model.noise_sigma < 0.0 || model.skew < 0.0)
    throw DataError("synth_generate: negative model parameter");

  const int K = profile.K;
  const std::int64_t n64 = profile.total();
  const int n = static_cast<int>(n64);

  Dataset out;
  out.batch.labels.reserve(n);
  for (int k = 0; k < K; ++k)
    out.batch.labels.insert(out.batch.labels.end(), profile.counts[k], k);

  // Fisher-Yates on the label order.
  Rng shuffle_rng(derive_seed(seed, stream::kSynthLabels));
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle_rng.below(i + 1));
    std::swap(out.batch.labels[i], out.batch.labels[j]);
  }

  const std::int64_t max_count =
      *std::max_element(profile.counts.begin(), profile.counts.end());
  std::vector<double> boost(K);
  for (int k = 0; k < K; ++k)
    boost[k] = model.signal *
               std::pow(static_cast<double>(profile.counts[k]) /
                            static_cast<double>(max_count),
                        model.skew);

  out.probs = Matrix(n, K);
  const std::uint64_t logit_seed = derive_seed(seed, stream::kSynthLogits);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(logit_seed, static_cast<std::uint64_t>(i)));
    auto row = out.probs.row(i);
    for (int k = 0; k < K; ++k) row[k] = model.noise_sigma * rng.normal();
    row[out.batch.labels[i]] += boost[out.batch.labels[i]];
    for (int k = 0; k < K; ++k) row[k] /= model.temperature;
    softmax_inplace(row);
  }
  return out;
}

namespace {

[[noreturn]] void parse_fail(const std::string& name, int line,
                             const std::string& what) {
  throw DataError(name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset load_predictions(std::istream& in, PredictionFormat format,
                         bool skip_header, const std::string& name) {
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  int cols = -1;
  std::string line;
  int line_no = 0;
  bool header_pending = skip_header;

  while (std::getline(in, line)) {
    ++line_no;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    // Normalize separators so both comma- and space-delimited rows parse.
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::replace(cleaned.begin(), cleaned.end(), '\t', ' ');
    std::istringstream ss(cleaned);
    std::vector<std::string> cells;
    std::string cell;
    while (ss >> cell) cells.push_back(cell);
    if (cells.empty()) continue;  // blank line
    if (cells.size() < 2) parse_fail(name, line_no, "row has no value columns");

    std::size_t pos = 0;
    long label = 0;
    try {
      label = std::stol(cells[0], &pos);
    } catch (const std::exception&) {
      parse_fail(name, line_no, "non-numeric label '" + cells[0] + "'");
    }
    if (pos != cells[0].size())
      parse_fail(name, line_no, "non-numeric label '" + cells[0] + "'");

    std::vector<double> values;
    values.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        v = std::stod(cells[c], &pos);
      } catch (const std::exception&) {
        parse_fail(name, line_no, "non-numeric cell '" + cells[c] + "'");
      }
      if (pos != cells[c].size())
        parse_fail(name, line_no, "non-numeric cell '" + cells[c] + "'");
      values.push_back(v);
    }

    if (cols < 0)
      cols = static_cast<int>(values.size());
    else if (static_cast<int>(values.size()) != cols)
      parse_fail(name, line_no,
                 "ragged row: expected " + std::to_string(cols) +
                     " values, got " + std::to_string(values.size()));

    if (label < 0 || label >= cols)
      parse_fail(name, line_no,
                 "label " + std::to_string(label) + " out of range [0, " +
                     std::to_string(cols) + ")");

    if (format == PredictionFormat::probs) {
      double sum = 0.0;
      for (double v : values) {
        if (v < 0.0)
          parse_fail(name, line_no, "negative probability");
        sum += v;
      }
      // Small allowance past 1e-3 so a deviation of exactly 1e-3 written in
      // decimal is not rejected over floating-point representation.
      if (std::abs(sum - 1.0) > 1e-3 * (1.0 + 1e-9))
        parse_fail(name, line_no,
                   "probability row sums to " + std::to_string(sum));
      for (double& v : values) v /= sum;
    }

    labels.push_back(static_cast<int>(label));
    rows.push_back(std::move(values));
  }

  if (rows.empty()) throw DataError(name + ": no data rows");

  Dataset out;
  out.batch.labels = std::move(labels);
  out.probs = Matrix(static_cast<int>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto dst = out.probs.row(static_cast<int>(i));
    std::copy(rows[i].begin(), rows[i].end(), dst.begin());
    if (format == PredictionFormat::logits) softmax_inplace(dst);
  }
  return out;
}

Dataset load_predictions(const std::string& path, PredictionFormat format,
                         bool skip_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction file: " + path);
  return load_predictions(in, format, skip_header, path);
}

void save_predictions(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write prediction file: " + path);
  char buf[64];
  for (int i = 0; i < data.probs.rows(); ++i) {
    out << data.batch.labels[i];
    for (double v : data.probs.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void stratified_split_indices(std::span<const int> labels, int K, double frac,
                              std::uint64_t seed, std::vector<int>& first,
                              std::vector<int>& second) {
  first.clear();
  second.clear();
  std::vector<std::vector<int>> by_class(K);
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));

  for (int k = 0; k < K; ++k) {
    auto& idx = by_class[k];
    if (idx.empty()) continue;
    Rng rng(derive_seed(seed, stream::kSplit, static_cast<std::uint64_t>(k)));
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(i + 1));
      std::swap(idx[i], idx[j]);
    }
    std::int64_t take = std::llround(frac * static_cast<double>(idx.size()));
    if (idx.size() == 1) take = 1;  // singleton classes go to the first part
    take = std::clamp<std::int64_t>(take, 0, static_cast<std::int64_t>(idx.size()));
    first.insert(first.end(), idx.begin(), idx.begin() + take);
    second.insert(second.end(), idx.begin() + take, idx.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
}

namespace {

Dataset gather(const Dataset& data, const std::vector<int>& indices) {
  Dataset out;
  out.batch.labels.reserve(indices.size());
  out.probs = Matrix(static_cast<int>(indices.size()), data.probs.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.batch.labels.push_back(data.batch.labels[indices[i]]);
    auto src = data.probs.row(indices[i]);
    std::copy(src.begin(), src.end(), out.probs.row(static_cast<int>(i)).begin());
  }
  return out;
}

}  // namespace

SplitResult split(const Dataset& data, double frac_cal, std::uint64_t seed,
                  bool stratified) {
  const int n = data.batch.n();
  if (n < 2) throw DataError("split needs at least 2 samples");
  if (frac_cal <= 0.0 || frac_cal >= 1.0)
    throw DataError("frac_cal must be in (0,1)");

  SplitResult res;
  if (stratified) {
    stratified_split_indices(data.batch.labels, data.probs.cols(), frac_cal,
                             seed, res.cal_indices, res.test_indices);
  } else {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, stream::kSplit));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(i + 1));
      std::swap(idx[i], idx[j]);
    }
    const auto n_cal = std::clamp<std::int64_t>(
        std::llround(frac_cal * static_cast<double>(n)), 0, n);
    res.cal_indices.assign(idx.begin(), idx.begin() + n_cal);
    res.test_indices.assign(idx.begin() + n_cal, idx.end());
    std::sort(res.cal_indices.begin(), res.cal_indices.end());
    std::sort(res.test_indices.begin(), res.test_indices.end());
  }

  if (res.cal_indices.empty() || res.test_indices.empty())
    throw DataError("split produced an empty side (frac_cal=" +
                    std::to_string(frac_cal) + ", n=" + std::to_string(n) + ")");

  res.cal = gather(data, res.cal_indices);
  res.test = gather(data, res.test_indices);
  return res;
}

}  // namespace tailcp
