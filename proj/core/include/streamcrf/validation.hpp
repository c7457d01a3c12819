#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamcrf/datagen.hpp"
#include "streamcrf/inference.hpp"
#include "streamcrf/potentials.hpp"

namespace streamcrf {

struct TensorCheck {
  std::string name;
  std::size_t count = 0;
  double cosine = 0.0;
  double normalized_max_error = 0.0;  // max |analytic - numeric| / max |numeric|
  double max_abs_error = 0.0;
  bool pass = false;
};

struct GradcheckOptions {
  double eps = 1e-3;
  double min_cosine = 0.9999;
  double max_normalized_error = 5e-5;
  double guard = 1e6;  // refuse when T * K * C^2 exceeds this
  Backend backend = Backend::Auto;
  int threads = 1;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;

  [[nodiscard]] bool pass() const;
  [[nodiscard]] const TensorCheck& at(const std::string& name) const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Central differences of sum_b log Z_b against the backward pass, for every
/// element of the prefix sums, transition, duration bias and projections.
GradcheckReport finite_diff_gradcheck(const Potentials& pot, const GradcheckOptions& opts = {});

struct EquivalenceConfig {
  int trials = 200;
  Dims max{1, 6, 3, 3};
  std::uint64_t seed = 1;
  bool enumerate = true;  // skipped per sequence above the enumeration guard
  bool gradients = true;
  bool delta_sweep = true;
  RandomInstanceOptions instance;
  double logz_tol = 1e-10;  // |a - b| / max(1, |b|)
  double grad_tol = 1e-8;   // absolute
  int threads = 1;
};

struct EquivalenceRow {
  int trial = 0;
  std::uint64_t seed = 0;
  Dims dims;
  double enum_err = 0.0;     // dense and streaming vs enumeration
  double stream_err = 0.0;   // streaming vs dense
  double delta_err = 0.0;    // checkpoint interval sweep vs dense
  double fast_err = 0.0;     // K <= 2 fast path vs generic streaming
  double grad_err = 0.0;     // dense vs streaming gradients and marginals
  bool viterbi_match = true;
  std::size_t clamp_events = 0;
  bool pass = true;
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;

  [[nodiscard]] bool pass() const;
  [[nodiscard]] EquivalenceRow worst() const;  // field-wise maxima
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// Rows carry (seed, dims); replay_trial rebuilds the same instance.
EquivalenceReport backend_equivalence(const EquivalenceConfig& cfg);
EquivalenceRow replay_trial(std::uint64_t seed, const Dims& dims, const EquivalenceConfig& cfg);

struct TrainConfig {
  int B = 4;
  int T = 200;
  int C = 8;
  int K = 12;
  int epochs = 100;
  double lr = 0.05;
  double fidelity = 0.7;
  std::uint64_t seed = 7;
  bool convex = false;  // freeze the emission table, train transitions and durations only
  std::optional<int> checkpoint_interval;
  int threads = 1;
};

struct TrainCurve {
  Backend backend = Backend::Auto;
  std::vector<double> losses;  // mean NLL before each update, epochs + 1 entries
  int divergence_epoch = -1;   // first epoch ending 5 straight increases
};

struct TrainReport {
  std::vector<TrainCurve> curves;
  double final_rel_diff = 0.0;  // first two curves
  double curve_cosine = 1.0;

  [[nodiscard]] bool non_increasing(double slack = 1e-12) const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// Gradient descent on (emission table, transition, duration bias) over a
/// synthetic symbol task, once per backend from identical initial values.
TrainReport training_convergence_demo(const TrainConfig& cfg, std::span<const Backend> backends);

}  // namespace streamcrf
