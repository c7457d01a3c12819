#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamcrf/potentials.hpp"

namespace streamcrf {

/// Seeded generator with platform-independent draws (the standard
/// distributions are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  /// Geometric on {1, 2, ...} with the given mean, redrawn until <= cap.
  int geometric(double mean, int cap);

 private:
  std::mt19937_64 engine_;
};

struct Dims {
  int B = 1;
  int T = 1;
  int K = 1;
  int C = 1;
};

/// Each dimension uniform on [1, max].
Dims random_dims(std::uint64_t seed, const Dims& max);

struct RandomInstanceOptions {
  bool variable_lengths = true;  // sequence 0 always has length T
  bool projections = false;
  bool scalar_boundaries = false;
};

/// Emissions ~ U[-2, 2], transitions ~ U[-1, 1], duration bias ~ U[-0.5, 0.5];
/// optional boundaries ~ U[-0.5, 0.5]. Fully determined by (seed, dims, options).
struct RandomInstance {
  std::uint64_t seed = 0;
  Dims dims;
  EmissionBatch emissions;
  SemiCrfParams params;

  [[nodiscard]] Potentials potentials(CenteringMode mode = CenteringMode::None) const {
    return make_potentials(emissions, params, mode);
  }
};

RandomInstance random_instance(std::uint64_t seed, const Dims& dims,
                               const RandomInstanceOptions& opts = {});

struct LabeledBatch {
  EmissionBatch emissions;
  std::vector<Segmentation> gold;
};

struct ImbalancedConfig {
  int B = 1;
  int T = 2000;
  int K = 50;
  std::vector<double> proportions{0.75, 0.15, 0.10};
  double active_gain = 1.0;
  double inactive = 0.0;
  double noise = 0.5;  // half-width of the uniform noise
  double mean_duration = 20.0;
};

/// Gold segments with each label's total mass set to round(p_c * T),
/// geometric durations truncated to [1, K], shuffled. Emissions are
/// active_gain at the gold label and `inactive` elsewhere, plus noise.
LabeledBatch generate_imbalanced(const ImbalancedConfig& cfg, std::uint64_t seed);

struct AblationConfig {
  ImbalancedConfig data;
  double segment_penalty = 0.0;  // subtracted from every duration bias entry
  double self_transition = 0.0;  // added to the transition diagonal
};

struct AblationModeResult {
  CenteringMode mode = CenteringMode::Mean;
  std::vector<int> segment_counts;  // decoded, per label, summed over the batch
};

struct AblationReport {
  std::vector<int> gold_counts;
  std::vector<double> nu;  // per-label baseline averaged over the batch
  std::vector<std::array<double, 3>> penalty;  // -nu * k at k = 10, 25, 50
  std::vector<AblationModeResult> modes;

  [[nodiscard]] const AblationModeResult& at(CenteringMode mode) const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// Viterbi decodes the same generated batch under each centering mode.
AblationReport centering_ablation(const AblationConfig& cfg, std::span<const CenteringMode> modes,
                                  std::uint64_t seed, int threads = 1);

/// max |S[t, c]| / sqrt(T) for one sequence of i.i.d. U[mean - 1, mean + 1]
/// emissions after centering.
double cumulative_peak_ratio(int T, int C, double mean, CenteringMode mode, std::uint64_t seed);

/// Noisy symbol sequences for the training demo: symbol = gold label with
/// probability `fidelity`, otherwise uniform over C symbols.
struct SymbolTask {
  int vocab = 0;
  std::vector<int> lengths;
  std::vector<std::vector<int>> symbols;
  std::vector<Segmentation> gold;
};

SymbolTask generate_symbol_task(int B, int T, int C, int K, double fidelity, std::uint64_t seed);

}  // namespace streamcrf
