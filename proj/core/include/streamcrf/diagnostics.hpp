#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamcrf/inference.hpp"
#include "streamcrf/marginals.hpp"
#include "streamcrf/potentials.hpp"

namespace streamcrf {

/// Spreads joint segment marginals (B, T, K, C, C), indexed by segment end,
/// over the positions each segment covers.
MarginalSet position_marginals(const Tensor& joint, const std::vector<int>& lengths);

/// Shannon entropy (nats) of the boundary posterior normalized over valid
/// positions, one value per sequence. exp(H) is the effective boundary count.
std::vector<double> boundary_entropy(const Tensor& boundary, const std::vector<int>& lengths);

struct InvariantCheck {
  std::string invariant;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  bool pass = true;
};

struct ConsistencyTolerances {
  double range = 1e-9;
  double normalization = 1e-5;
  double mass_relative = 1e-5;
  double segment_count = 1e-9;
};

struct ConsistencyReport {
  std::vector<InvariantCheck> checks;
  double boundary_min = 0.0;  // over valid positions
  double boundary_max = 0.0;

  [[nodiscard]] bool pass() const;
  [[nodiscard]] const InvariantCheck& at(const std::string& invariant) const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Range, normalization, mass conservation, padding and expected segment
/// count. Padding is checked for exact zeros.
ConsistencyReport self_consistency_report(const MarginalSet& marginals,
                                          const ConsistencyTolerances& tol = {});

/// log Z - score(gold) for sequence b.
double nll(const Potentials& pot, const Segmentation& gold, int b, double log_z);

std::vector<double> nll(const Potentials& pot, const std::vector<Segmentation>& gold,
                        const InferenceOptions& opts = {});

/// Adds weight * d score(gold) / d potentials. The first transition is
/// softmax-weighted over the virtual source label.
void add_gold_statistics(GradientSet& grads, const Potentials& pot, const Segmentation& gold,
                         int b, double weight);

struct NllResult {
  std::vector<double> values;
  GradientSet gradients;  // of sum_b weights[b] * nll_b
};

/// Weights default to 1 per sequence.
NllResult nll_with_gradients(const Potentials& pot, const std::vector<Segmentation>& gold,
                             std::span<const double> weights = {},
                             const InferenceOptions& opts = {});

}  // namespace streamcrf
