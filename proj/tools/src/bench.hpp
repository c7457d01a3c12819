#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamcrf/inference.hpp"

namespace streamcrf::cli {

struct BenchConfig {
  std::vector<int> T{1000};
  std::vector<int> K{8};
  std::vector<int> C{5};
  int B = 1;
  std::vector<Backend> backends{Backend::Streaming, Backend::Dense};
  int repeats = 3;
  std::optional<int> delta;
  std::uint64_t seed = 0;
  int threads = 1;
  std::size_t guard_bytes = default_dense_guard_bytes();
};

struct BenchRow {
  std::string backend;
  int T = 0;
  int K = 0;
  int C = 0;
  int B = 0;
  double wall_ms_forward = 0.0;   // median over repeats, after one warmup
  double wall_ms_backward = 0.0;
  std::size_t peak_working_bytes = 0;
  double positions_per_sec = 0.0;
  bool guarded = false;  // dense guard refused the size
};

std::vector<BenchRow> run_bench(const BenchConfig& cfg);

std::string bench_csv(const std::vector<BenchRow>& rows);
nlohmann::json bench_json(const std::vector<BenchRow>& rows);

}  // namespace streamcrf::cli
