#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tailcp/experiment.hpp"

namespace tailcp {

namespace {

// Shortest representation that parses back to the same double, so a
// write/read round trip reproduces records exactly.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string();
}

const char* kRecordHeader =
    "method,score,alpha,eta,seed,coverage,avg_size,cov_head,cov_tail,"
    "covgap_ht,covgap,lambda,k_r";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("bad number '" + s + "' in " + where);
  return v;
}

std::optional<double> parse_opt(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, where);
}

}  // namespace

void write_records_csv(const std::string& path,
                       const std::vector<TrialRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << to_string(r.method) << ',' << to_string(r.score) << ','
        << fmt(r.alpha) << ',' << fmt(r.eta) << ',' << r.seed << ','
        << fmt(r.coverage) << ',' << fmt(r.avg_size) << ',' << fmt(r.cov_head)
        << ',' << fmt(r.cov_tail) << ',' << fmt(r.covgap_ht) << ','
        << fmt(r.covgap) << ',' << fmt(r.lambda) << ','
        << (r.k_r ? std::to_string(*r.k_r) : std::string()) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<TrialRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordHeader)
    throw DataError(path + ": unexpected header '" + line + "'");

  std::vector<TrialRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 13)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 13 columns, got " +
                      std::to_string(cells.size()));
    const std::string where = path + ":" + std::to_string(line_no);
    TrialRecord r;
    r.method = method_from_string(cells[0]);
    r.score = score_from_string(cells[1]);
    r.alpha = parse_double(cells[2], where);
    r.eta = parse_double(cells[3], where);
    r.seed = std::stoull(cells[4]);
    r.coverage = parse_double(cells[5], where);
    r.avg_size = parse_double(cells[6], where);
    r.cov_head = parse_opt(cells[7], where);
    r.cov_tail = parse_opt(cells[8], where);
    r.covgap_ht = parse_opt(cells[9], where);
    r.covgap = parse_opt(cells[10], where);
    r.lambda = parse_opt(cells[11], where);
    if (!cells[12].empty()) r.k_r = std::stoi(cells[12]);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

using nlohmann::json;

json stat_json(const Stat& s) {
  return json{{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
}

void put_opt(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

json record_json(const TrialRecord& r) {
  json j{{"method", to_string(r.method)}, {"score", to_string(r.score)},
         {"alpha", r.alpha},              {"eta", r.eta},
         {"seed", r.seed},                {"coverage", r.coverage},
         {"avg_size", r.avg_size}};
  put_opt(j, "cov_head", r.cov_head);
  put_opt(j, "cov_tail", r.cov_tail);
  put_opt(j, "covgap_ht", r.covgap_ht);
  put_opt(j, "covgap", r.covgap);
  put_opt(j, "lambda", r.lambda);
  if (r.k_r) j["k_r"] = *r.k_r;
  return j;
}

}  // namespace

void write_run_json(const std::string& path, const RunResult& result) {
  json j;
  j["records"] = json::array();
  for (const auto& r : result.records) j["records"].push_back(record_json(r));

  j["summary"] = json::array();
  for (const auto& s : result.summary) {
    json row{{"method", to_string(s.method)}, {"score", to_string(s.score)},
             {"alpha", s.alpha},              {"eta", s.eta},
             {"trials", s.trials}};
    row["coverage"] = stat_json(s.coverage);
    row["avg_size"] = stat_json(s.avg_size);
    if (s.cov_head.n > 0) row["cov_head"] = stat_json(s.cov_head);
    if (s.cov_tail.n > 0) row["cov_tail"] = stat_json(s.cov_tail);
    if (s.covgap_ht.n > 0) row["covgap_ht"] = stat_json(s.covgap_ht);
    if (s.covgap.n > 0) row["covgap"] = stat_json(s.covgap);
    j["summary"].push_back(std::move(row));
  }

  j["failures"] = json::array();
  for (const auto& f : result.failures) {
    j["failures"].push_back(json{{"method", to_string(f.method)},
                                 {"score", to_string(f.score)},
                                 {"alpha", f.alpha},
                                 {"eta", f.eta},
                                 {"seed", f.seed},
                                 {"error", f.message}});
  }

  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

void write_curve_csv(const std::string& path,
                     const std::vector<CurveRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write curve: " + path);
  out << "method,score,alpha,eta,coverage,cov_head,cov_tail,avg_size,threshold\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << to_string(r.score) << ','
        << fmt(r.alpha) << ',' << fmt(r.eta) << ',' << fmt(r.coverage) << ','
        << fmt(r.cov_head) << ',' << fmt(r.cov_tail) << ',' << fmt(r.avg_size)
        << ',' << fmt(r.threshold) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace tailcp
