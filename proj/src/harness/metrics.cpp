#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "feddiv/harness/harness.hpp"

namespace feddiv::harness {
namespace {

const char* kFedHeader =
    "experiment_id,round,layer_index,layer_name,divergence,mean_divergence,test_accuracy,train_loss,test_loss";
const char* kCentralizedHeader = "experiment_id,epoch,test_accuracy,test_loss,train_loss";

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string real(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(ErrorKind::truncated, "bad number '" + s + "'", where);
  return v;
}

long long parse_int(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(ErrorKind::truncated, "bad integer '" + s + "'", where);
  return v;
}

std::optional<double> parse_optional(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, where);
}

// Rows of a CSV file after checking its header.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string(), path.string());
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw FormatError(ErrorKind::bad_magic, "unexpected CSV header", path.string());
  const std::size_t columns = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != columns)
      throw FormatError(ErrorKind::truncated, "row has " + std::to_string(cells.size()) + " columns",
                        path.string() + ":" + std::to_string(n));
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string(), path.string());
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace

void write_fed_metrics(const std::filesystem::path& path, const std::string& experiment_id,
                       const nn::ModelSpec& spec, const std::vector<fed::RoundRecord>& records) {
  std::ostringstream out;
  out << kFedHeader << '\n';
  for (const auto& r : records) {
    const std::string tail = real(r.mean_divergence) + ',' + real(r.test_accuracy) + ',' + real(r.train_loss) + ',' +
                             real(r.test_loss) + '\n';
    for (const auto& [layer, div] : r.per_layer_divergence)
      out << experiment_id << ',' << r.round << ',' << layer << ','
          << quoted(spec.layers.at(static_cast<std::size_t>(layer)).name) << ',' << real(div) << ',' << tail;
    out << experiment_id << ',' << r.round << ",-1,," << real(r.mean_divergence) << ',' << tail;
  }
  write_text(path, out.str());
}

FedMetrics read_fed_metrics(const std::filesystem::path& path) {
  FedMetrics m;
  const auto rows = read_rows(path, kFedHeader);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i];
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    if (m.experiment_id.empty()) m.experiment_id = c[0];
    const int round = static_cast<int>(parse_int(c[1], where));
    if (m.records.empty() || m.records.back().round != round) {
      m.records.emplace_back();
      m.records.back().round = round;
    }
    auto& r = m.records.back();
    const long long layer = parse_int(c[2], where);
    const double div = parse_real(c[4], where);
    if (layer >= 0) {
      r.per_layer_divergence[static_cast<int>(layer)] = div;
    } else {
      r.mean_divergence = parse_real(c[5], where);
      r.test_accuracy = parse_optional(c[6], where);
      r.train_loss = parse_real(c[7], where);
      r.test_loss = parse_optional(c[8], where);
    }
  }
  return m;
}

void write_centralized_metrics(const std::filesystem::path& path, const std::string& experiment_id,
                               const std::vector<fed::EpochRecord>& records) {
  std::ostringstream out;
  out << kCentralizedHeader << '\n';
  for (const auto& r : records)
    out << experiment_id << ',' << r.epoch << ',' << real(r.test_accuracy) << ',' << real(r.test_loss) << ','
        << real(r.train_loss) << '\n';
  write_text(path, out.str());
}

std::vector<fed::EpochRecord> read_centralized_metrics(const std::filesystem::path& path) {
  std::vector<fed::EpochRecord> out;
  const auto rows = read_rows(path, kCentralizedHeader);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    const auto& c = rows[i];
    out.push_back({static_cast<int>(parse_int(c[1], where)), parse_real(c[2], where), parse_real(c[3], where),
                   parse_real(c[4], where)});
  }
  return out;
}

std::optional<int> rounds_to_threshold(const std::vector<fed::RoundRecord>& records, double threshold) {
  for (const auto& r : records)
    if (r.test_accuracy && *r.test_accuracy >= threshold) return r.round;
  return std::nullopt;
}

double best_accuracy(const std::vector<fed::RoundRecord>& records) {
  double best = 0.0;
  for (const auto& r : records)
    if (r.test_accuracy) best = std::max(best, *r.test_accuracy);
  return best;
}

double mean_divergence(const std::vector<fed::RoundRecord>& records) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : records) total += r.mean_divergence;
  return total / static_cast<double>(records.size());
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream out;
  out << "variant,value,best_accuracy,delta_accuracy,mean_divergence,delta_divergence,rounds_to_threshold,"
         "cl_best_accuracy,relative_degradation\n";
  for (const auto& r : c.rows) {
    const std::string value = r.value.is_string() ? r.value.get<std::string>() : r.value.dump();
    out << quoted(r.variant) << ',' << quoted(value) << ',' << real(r.best_accuracy) << ',' << real(r.delta_accuracy)
        << ',' << real(r.mean_divergence) << ',' << real(r.delta_divergence) << ','
        << (r.rounds_to_threshold ? std::to_string(*r.rounds_to_threshold) : "unreached") << ','
        << real(r.cl_best_accuracy) << ',' << real(r.relative_degradation) << '\n';
  }
  return out.str();
}

void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison) {
  write_text(path, comparison_csv(comparison));
}

nlohmann::json comparison_to_json(const Comparison& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows) {
    nlohmann::json row = {{"variant", r.variant},
                          {"value", r.value},
                          {"best_accuracy", r.best_accuracy},
                          {"delta_accuracy", r.delta_accuracy},
                          {"mean_divergence", r.mean_divergence},
                          {"delta_divergence", r.delta_divergence},
                          {"rounds_to_threshold", nullptr},
                          {"cl_best_accuracy", nullptr},
                          {"relative_degradation", nullptr}};
    if (r.rounds_to_threshold) row["rounds_to_threshold"] = *r.rounds_to_threshold;
    if (r.cl_best_accuracy) row["cl_best_accuracy"] = *r.cl_best_accuracy;
    if (r.relative_degradation) row["relative_degradation"] = *r.relative_degradation;
    rows.push_back(row);
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : c.verdicts)
    verdicts.push_back({{"metric", v.metric}, {"spearman", v.spearman}, {"verdict", v.verdict}});
  return {{"axis", sweep_axis_name(c.axis)}, {"threshold", c.threshold}, {"rows", rows}, {"verdicts", verdicts}};
}

}  // namespace feddiv::harness
