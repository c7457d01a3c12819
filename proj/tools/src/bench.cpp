#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "streamcrf/datagen.hpp"
#include "streamcrf/fast_paths.hpp"
#include "streamcrf/io.hpp"
#include "streamcrf/reference.hpp"
#include "streamcrf/streaming.hpp"

namespace streamcrf::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One timed forward + backward; returns {forward_ms, backward_ms}.
std::pair<double, double> time_once(const Potentials& pot, Backend backend, const BenchConfig& cfg,
                                    MemoryMeter& meter) {
  const auto start = Clock::now();
  if (backend == Backend::Dense) {
    const DenseOptions opts{cfg.guard_bytes, &meter};
    DenseMessages msgs = dense_forward(pot, opts);
    const double fwd = ms_since(start);
    const auto mid = Clock::now();
    dense_backward_marginals(pot, msgs, {}, opts);
    return {fwd, ms_since(mid)};
  }
  if (backend == Backend::Auto && dispatch(pot) != BackendKind::Streaming) {
    pot.K == 1 ? k1_forward(pot, &meter) : k2_forward(pot, &meter);
    const double fwd = ms_since(start);
    const auto mid = Clock::now();
    fast_path_posterior(pot, {}, &meter);
    return {fwd, ms_since(mid)};
  }
  StreamingOptions opts;
  opts.checkpoint_interval = cfg.delta;
  opts.meter = &meter;
  opts.threads = cfg.threads;
  const ForwardResult fwd_res = streaming_forward(pot, opts);
  const double fwd = ms_since(start);
  const auto mid = Clock::now();
  streaming_backward(pot, fwd_res, {}, opts);
  return {fwd, ms_since(mid)};
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  for (int T : cfg.T) {
    for (int K : cfg.K) {
      for (int C : cfg.C) {
        RandomInstanceOptions ro;
        ro.variable_lengths = false;
        const Potentials pot = random_instance(cfg.seed, {cfg.B, T, K, C}, ro).potentials();
        for (Backend backend : cfg.backends) {
          BenchRow row{std::string(to_string(backend)), T, K, C, cfg.B};
          if (backend == Backend::Dense &&
              dense_required_bytes(cfg.B, T, K, C, true) > cfg.guard_bytes) {
            row.guarded = true;
            rows.push_back(row);
            continue;
          }
          MemoryMeter meter;
          time_once(pot, backend, cfg, meter);
          std::vector<double> fwd, bwd;
          for (int r = 0; r < std::max(1, cfg.repeats); ++r) {
            meter.reset();
            const auto [f, b] = time_once(pot, backend, cfg, meter);
            fwd.push_back(f);
            bwd.push_back(b);
          }
          row.wall_ms_forward = median(fwd);
          row.wall_ms_backward = median(bwd);
          row.peak_working_bytes = meter.peak_total();
          const double secs = (row.wall_ms_forward + row.wall_ms_backward) / 1000.0;
          row.positions_per_sec = secs > 0.0 ? static_cast<double>(cfg.B) * T / secs : 0.0;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << kCsvHeader << '\n'
     << "backend,T,K,C,B,wall_ms_forward,wall_ms_backward,peak_working_bytes,positions_per_sec,"
        "status\n";
  for (const auto& r : rows) {
    os << r.backend << ',' << r.T << ',' << r.K << ',' << r.C << ',' << r.B << ',';
    if (r.guarded) {
      os << ",,,,OOM-GUARD\n";
      continue;
    }
    os << r.wall_ms_forward << ',' << r.wall_ms_backward << ',' << r.peak_working_bytes << ','
       << r.positions_per_sec << ",ok\n";
  }
  return os.str();
}

nlohmann::json bench_json(const std::vector<BenchRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"backend", r.backend}, {"T", r.T}, {"K", r.K}, {"C", r.C}, {"B", r.B},
                     {"status", r.guarded ? "OOM-GUARD" : "ok"}};
    if (!r.guarded) {
      j["wall_ms_forward"] = r.wall_ms_forward;
      j["wall_ms_backward"] = r.wall_ms_backward;
      j["peak_working_bytes"] = r.peak_working_bytes;
      j["positions_per_sec"] = r.positions_per_sec;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace streamcrf::cli
