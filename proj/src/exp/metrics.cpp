#include "bchg/exp/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bchg/errors.hpp"

namespace bchg {

const char* kMetricsCsvHeader =
    "seed,iter,objective,partial_norm,guiding_norm,total_norm,comp_1,comp_2,comp_3,comp_4,"
    "wall_ms";

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("write_metrics_csv: cannot open " + path);
  out << kMetricsCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.seed << ',' << r.iter << ',' << format_double(r.objective) << ','
        << format_double(r.partial_norm) << ',' << format_double(r.guiding_norm) << ','
        << format_double(r.total_norm) << ',' << format_double(r.comp_1) << ','
        << format_double(r.comp_2) << ',' << format_double(r.comp_3) << ','
        << format_double(r.comp_4) << ',' << r.wall_ms << "\n";
  }
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("read_metrics_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigurationError("read_metrics_csv: empty file");
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw ConfigurationError("read_metrics_csv: malformed row");
    MetricsRecord r;
    r.seed = std::stoull(cells[0]);
    r.iter = std::stoi(cells[1]);
    r.objective = std::stod(cells[2]);
    r.partial_norm = std::stod(cells[3]);
    r.guiding_norm = std::stod(cells[4]);
    r.total_norm = std::stod(cells[5]);
    r.comp_1 = std::stod(cells[6]);
    r.comp_2 = std::stod(cells[7]);
    r.comp_3 = std::stod(cells[8]);
    r.comp_4 = std::stod(cells[9]);
    r.wall_ms = std::stol(cells[10]);
    records.push_back(r);
  }
  return records;
}

}  // namespace bchg
