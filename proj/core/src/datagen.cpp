#include "streamcrf/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "streamcrf/inference.hpp"
#include "streamcrf/io.hpp"

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

// Gold tiling of [0, T) whose per-label mass is exactly `mass[c]`.
Segmentation stratified_segments(Rng& rng, const std::vector<int>& mass, int K, double mean) {
  Segmentation segs;
  for (std::size_t c = 0; c < mass.size(); ++c) {
    for (int left = mass[c]; left > 0;) {
      const int d = std::min(left, rng.geometric(mean, K));
      segs.push_back({0, d, static_cast<int>(c)});
      left -= d;
    }
  }
  for (std::size_t i = segs.size(); i > 1; --i) {
    std::swap(segs[i - 1], segs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  }
  int pos = 0;
  for (Segment& s : segs) {
    s.start = pos;
    pos += s.duration;
  }
  return segs;
}

std::vector<int> label_mass(const std::vector<double>& p, int T) {
  std::vector<int> mass(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) mass[c] = static_cast<int>(std::lround(p[c] * T));
  const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  mass[top] += T - std::accumulate(mass.begin(), mass.end(), 0);
  return mass;
}

}  // namespace

int Rng::geometric(double mean, int cap) {
  if (mean < 1.0 || cap < 1) throw ContractViolation("geometric needs mean >= 1 and cap >= 1");
  if (mean == 1.0) return 1;
  const double log_q = std::log1p(-1.0 / mean);
  for (;;) {
    const double u = 1.0 - uniform();  // (0, 1]
    const double k = 1.0 + std::floor(std::log(u) / log_q);
    if (k <= cap) return static_cast<int>(k);
  }
}

Dims random_dims(std::uint64_t seed, const Dims& max) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Dims d;
  d.B = rng.uniform_int(1, max.B);
  d.T = rng.uniform_int(1, max.T);
  d.K = rng.uniform_int(1, max.K);
  d.C = rng.uniform_int(1, max.C);
  return d;
}

RandomInstance random_instance(std::uint64_t seed, const Dims& dims,
                               const RandomInstanceOptions& opts) {
  if (dims.B < 1 || dims.T < 1 || dims.K < 1 || dims.C < 1) {
    throw InputError("instance dimensions must all be >= 1");
  }
  Rng rng(seed);
  RandomInstance inst;
  inst.seed = seed;
  inst.dims = dims;
  const auto B = sz(dims.B), T = sz(dims.T), C = sz(dims.C);
  inst.emissions.scores = Tensor({B, T, C});
  inst.emissions.lengths.assign(B, dims.T);
  if (opts.variable_lengths) {
    for (std::size_t b = 1; b < B; ++b) inst.emissions.lengths[b] = rng.uniform_int(1, dims.T);
  }
  for (double& x : inst.emissions.scores.data()) x = rng.uniform(-2.0, 2.0);
  SemiCrfParams& p = inst.params;
  p = SemiCrfParams::zeros(dims.C, dims.K);
  for (double& x : p.transition.data()) x = rng.uniform(-1.0, 1.0);
  for (double& x : p.duration_bias.data()) x = rng.uniform(-0.5, 0.5);
  if (opts.scalar_boundaries) {
    p.pi_start = std::vector<double>(C);
    p.pi_end = std::vector<double>(C);
    for (double& x : *p.pi_start) x = rng.uniform(-0.5, 0.5);
    for (double& x : *p.pi_end) x = rng.uniform(-0.5, 0.5);
  }
  if (opts.projections) {
    p.proj_start = Tensor({B, T, C});
    p.proj_end = Tensor({B, T, C});
    for (double& x : p.proj_start->data()) x = rng.uniform(-0.5, 0.5);
    for (double& x : p.proj_end->data()) x = rng.uniform(-0.5, 0.5);
  }
  return inst;
}

LabeledBatch generate_imbalanced(const ImbalancedConfig& cfg, std::uint64_t seed) {
  const int C = static_cast<int>(cfg.proportions.size());
  if (C < 1) throw InputError("need at least one label proportion");
  double total = 0.0;
  for (double p : cfg.proportions) {
    if (!(p >= 0.0)) throw InputError("label proportions must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "label proportions sum to " << total << ", expected 1";
    throw InputError(os.str());
  }
  if (cfg.B < 1 || cfg.T < 1 || cfg.K < 1) throw InputError("B, T and K must be >= 1");
  Rng rng(seed);
  LabeledBatch out;
  out.emissions.scores = Tensor({sz(cfg.B), sz(cfg.T), sz(C)});
  out.emissions.lengths.assign(sz(cfg.B), cfg.T);
  const std::vector<int> mass = label_mass(cfg.proportions, cfg.T);
  for (int b = 0; b < cfg.B; ++b) {
    Segmentation gold = stratified_segments(rng, mass, cfg.K, cfg.mean_duration);
    for (const Segment& s : gold) {
      for (int t = s.start; t < s.end(); ++t) {
        for (int c = 0; c < C; ++c) {
          const double base = c == s.label ? cfg.active_gain : cfg.inactive;
          out.emissions.scores(b, t, c) = base + rng.uniform(-cfg.noise, cfg.noise);
        }
      }
    }
    out.gold.push_back(std::move(gold));
  }
  return out;
}

const AblationModeResult& AblationReport::at(CenteringMode mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return m;
  }
  throw ContractViolation("centering mode not part of this ablation");
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j;
  j["gold_counts"] = gold_counts;
  j["nu"] = nu;
  j["penalty_k10_k25_k50"] = penalty;
  for (const auto& m : modes) j["decoded_counts"][std::string(to_string(m.mode))] = m.segment_counts;
  return j;
}

std::string AblationReport::to_csv() const {
  std::ostringstream os;
  os << kCsvHeader << '\n' << "label,nu,penalty_k10,penalty_k25,penalty_k50,gold";
  for (const auto& m : modes) os << ",count_" << to_string(m.mode);
  os << '\n';
  for (std::size_t c = 0; c < nu.size(); ++c) {
    os << c << ',' << nu[c] << ',' << penalty[c][0] << ',' << penalty[c][1] << ','
       << penalty[c][2] << ',' << gold_counts[c];
    for (const auto& m : modes) os << ',' << m.segment_counts[c];
    os << '\n';
  }
  return os.str();
}

AblationReport centering_ablation(const AblationConfig& cfg, std::span<const CenteringMode> modes,
                                  std::uint64_t seed, int threads) {
  const LabeledBatch data = generate_imbalanced(cfg.data, seed);
  const int C = static_cast<int>(cfg.data.proportions.size());
  SemiCrfParams params = SemiCrfParams::zeros(C, cfg.data.K);
  params.duration_bias.fill(-cfg.segment_penalty);
  for (int c = 0; c < C; ++c) params.transition(c, c) = cfg.self_transition;

  AblationReport r;
  r.gold_counts.assign(sz(C), 0);
  for (const auto& seg : data.gold) {
    for (const Segment& s : seg) ++r.gold_counts[sz(s.label)];
  }
  const CenteredEmissions mean = center_emissions(data.emissions, CenteringMode::Mean);
  r.nu.assign(sz(C), 0.0);
  for (int b = 0; b < cfg.data.B; ++b) {
    for (int c = 0; c < C; ++c) r.nu[sz(c)] += mean.baseline(b, c) / cfg.data.B;
  }
  for (double nu : r.nu) r.penalty.push_back({-nu * 10, -nu * 25, -nu * 50});

  InferenceOptions opts;
  opts.backend = Backend::Streaming;
  opts.threads = threads;
  for (CenteringMode mode : modes) {
    const Potentials pot = make_potentials(data.emissions, params, mode);
    AblationModeResult res{mode, std::vector<int>(sz(C), 0)};
    for (const Decoded& d : decode(pot, opts)) {
      for (const Segment& s : d.segmentation) ++res.segment_counts[sz(s.label)];
    }
    r.modes.push_back(std::move(res));
  }
  return r;
}

double cumulative_peak_ratio(int T, int C, double mean, CenteringMode mode, std::uint64_t seed) {
  Rng rng(seed);
  EmissionBatch em{Tensor({1, sz(T), sz(C)}), {T}};
  for (double& x : em.scores.data()) x = rng.uniform(mean - 1.0, mean + 1.0);
  const CumulativeScores S = build_cumulative(center_emissions(em, mode));
  double peak = 0.0;
  for (double v : S.values.data()) peak = std::max(peak, std::abs(v));
  return peak / std::sqrt(static_cast<double>(T));
}

SymbolTask generate_symbol_task(int B, int T, int C, int K, double fidelity, std::uint64_t seed) {
  if (B < 1 || T < 1 || C < 1 || K < 1) throw InputError("B, T, C and K must be >= 1");
  Rng rng(seed);
  SymbolTask task;
  task.vocab = C;
  task.lengths.assign(sz(B), T);
  const double mean = std::max(1.0, std::min(20.0, K / 2.0));
  for (int b = 0; b < B; ++b) {
    Segmentation gold;
    std::vector<int> symbols;
    for (int pos = 0; pos < T;) {
      const int d = std::min(T - pos, rng.geometric(mean, K));
      const int label = rng.uniform_int(0, C - 1);
      gold.push_back({pos, d, label});
      for (int t = 0; t < d; ++t) {
        symbols.push_back(rng.uniform() < fidelity ? label : rng.uniform_int(0, C - 1));
      }
      pos += d;
    }
    task.gold.push_back(std::move(gold));
    task.symbols.push_back(std::move(symbols));
  }
  return task;
}

}  // namespace streamcrf
