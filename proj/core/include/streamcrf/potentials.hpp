#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "streamcrf/numeric.hpp"

namespace streamcrf {

/// Raw per-position label scores for a padded batch.
struct EmissionBatch {
  Tensor scores;             // (B, T, C)
  std::vector<int> lengths;  // B entries, each in [1, T]

  [[nodiscard]] int batch() const { return static_cast<int>(scores.dim(0)); }
  [[nodiscard]] int length() const { return static_cast<int>(scores.dim(1)); }
  [[nodiscard]] int labels() const { return static_cast<int>(scores.dim(2)); }
};

/// Throws InputError on bad shapes, lengths, or a non-finite valid score.
void validate(const EmissionBatch& emissions);

enum class CenteringMode { Mean, None, SharedMax };

std::string_view to_string(CenteringMode mode);
CenteringMode parse_centering(std::string_view name);

struct CenteredEmissions {
  Tensor centered;  // (B, T, C); zero at padded positions unless mode == None
  Tensor baseline;  // (B, C) per-label mean (Mean mode only)
  Tensor shift;     // (B, T) per-position max (SharedMax mode only)
  std::vector<int> lengths;
  CenteringMode mode = CenteringMode::Mean;
};

/// Boundary-indexed prefix sums: values(b, t, c) is the sum of centered
/// emissions over tokens [0, t). Entries past L_b repeat values(b, L_b, c).
struct CumulativeScores {
  Tensor values;  // (B, T+1, C)
  std::vector<int> lengths;
};

/// Model parameters. Durations are 1-based in the math and stored at k-1.
struct SemiCrfParams {
  int num_labels = 0;
  int max_duration = 0;
  Tensor transition;     // (C, C): row = source label, column = destination
  Tensor duration_bias;  // (K, C)
  std::optional<std::vector<double>> pi_start;
  std::optional<std::vector<double>> pi_end;
  std::optional<Tensor> proj_start;  // (B, T, C)
  std::optional<Tensor> proj_end;    // (B, T, C)

  static SemiCrfParams zeros(int num_labels, int max_duration);

  [[nodiscard]] bool has_projections() const {
    return proj_start.has_value() || proj_end.has_value();
  }
  void validate() const;
};

struct Segment {
  int start = 0;
  int duration = 1;
  int label = 0;

  [[nodiscard]] int end() const { return start + duration; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Half-open segments tiling [0, L) in order.
using Segmentation = std::vector<Segment>;

/// Throws InputError describing the first violated tiling constraint.
void validate_segmentation(const Segmentation& seg, int length, int max_duration,
                           int num_labels);

/// Everything a backend reads: prefix sums with scalar boundaries already
/// resolved, plus transition, duration bias and optional projections.
struct Potentials {
  Tensor cum;            // (B, T+1, C)
  Tensor transition;     // (C, C)
  Tensor duration_bias;  // (K, C)
  std::optional<Tensor> proj_start;  // (B, T, C), scalar pi_start composed in
  std::optional<Tensor> proj_end;    // (B, T, C), scalar pi_end composed in
  std::vector<int> lengths;
  int B = 0;
  int T = 0;
  int C = 0;
  int K = 0;

  [[nodiscard]] bool has_projections() const { return proj_start.has_value(); }

  /// Everything in the edge potential except the transition term.
  /// Requires 1 <= k <= t <= L_b; unchecked.
  [[nodiscard]] double segment_score(int b, int t, int k, int c) const {
    double v = (cum(b, t, c) - cum(b, t - k, c)) + duration_bias(k - 1, c);
    if (proj_start) v += (*proj_start)(b, t - k, c) + (*proj_end)(b, t - 1, c);
    return v;
  }
};

/// d log Z (or d loss) with respect to each tensor in Potentials.
struct GradientSet {
  Tensor cum;            // (B, T+1, C)
  Tensor transition;     // (C, C)
  Tensor duration_bias;  // (K, C)
  std::optional<Tensor> proj_start;
  std::optional<Tensor> proj_end;

  static GradientSet zeros_like(const Potentials& pot);
};

CenteredEmissions center_emissions(const EmissionBatch& emissions, CenteringMode mode);

CumulativeScores build_cumulative(const CenteredEmissions& centered);

/// Subtracts pi_start at boundary 0 and adds pi_end at boundary L_b.
CumulativeScores fold_scalar_boundaries(CumulativeScores scores,
                                        std::span<const double> pi_start,
                                        std::span<const double> pi_end);

/// Resolves scalar boundaries (folded into the prefix sums, or composed into
/// the projections when those are present) and checks shapes.
Potentials make_potentials(const CumulativeScores& scores, const SemiCrfParams& params);

/// Convenience: center, accumulate and resolve in one call.
Potentials make_potentials(const EmissionBatch& emissions, const SemiCrfParams& params,
                           CenteringMode mode);

/// Log-potential of a segment [t-k, t) labelled c entered from label c_src.
/// Throws ContractViolation unless 1 <= k <= min(K, t) and t <= L_b.
double edge_potential(const Potentials& pot, int b, int t, int k, int c, int c_src);

/// Score of a labelled segmentation entered from an explicit source label.
double path_score(const Potentials& pot, const Segmentation& seg, int b, int source);

enum class SourceReduction { LogSumExp, Max };

/// Path score with the virtual source label reduced out (logsumexp by default,
/// matching the partition function's path measure).
double score_segmentation(const Potentials& pot, const Segmentation& seg, int b,
                          SourceReduction reduce = SourceReduction::LogSumExp);

/// Chains a prefix-sum gradient back to raw emissions through the centering.
/// SharedMax shifts are path-invariant and treated as constants.
Tensor emission_gradient(const Tensor& grad_cum, const std::vector<int>& lengths,
                         CenteringMode mode);

/// Gradients for pi_start / pi_end given gradients on the resolved potentials.
std::pair<std::vector<double>, std::vector<double>> scalar_boundary_gradients(
    const GradientSet& grads, const Potentials& pot);

}  // namespace streamcrf
