#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bchg {

// One row per (seed, outer iteration). The four component slots are
// task-specific (thermal: stability, energy cost, insulation cost, airflow
// cost; toy game: f(0|A) and the follower's a-probabilities at S; others
// documented in the README).
struct MetricsRecord {
  std::uint64_t seed = 0;
  int iter = 0;
  double objective = 0.0;
  double partial_norm = 0.0;
  double guiding_norm = 0.0;
  double total_norm = 0.0;
  double comp_1 = 0.0;
  double comp_2 = 0.0;
  double comp_3 = 0.0;
  double comp_4 = 0.0;
  long wall_ms = 0;
};

extern const char* kMetricsCsvHeader;

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace bchg
