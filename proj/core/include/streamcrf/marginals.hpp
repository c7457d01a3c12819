#pragma once

#include <vector>

#include "streamcrf/numeric.hpp"

namespace streamcrf {

/// Posterior summaries derived from joint segment marginals.
struct MarginalSet {
  Tensor position;                       // (B, T, C): P(label c covers token t)
  Tensor boundary;                       // (B, T): P(a segment starts at t)
  std::vector<double> expected_segments;  // (B)
  std::vector<int> lengths;
};

/// Collects segment masses mu(start, k, c) summed over source labels and
/// turns them into a MarginalSet. Calls for different sequences touch
/// disjoint storage and may run concurrently.
class MarginalAccumulator {
 public:
  MarginalAccumulator(int B, int T, int C, std::vector<int> lengths);

  void add(int b, int start, int duration, int label, double mass) {
    cover_delta_(b, start, label) += mass;
    cover_delta_(b, start + duration, label) -= mass;
    boundary_(b, start) += mass;
  }

  [[nodiscard]] MarginalSet finish() const;

 private:
  std::vector<int> lengths_;
  Tensor cover_delta_;  // (B, T+1, C) difference array over positions
  Tensor boundary_;     // (B, T)
};

}  // namespace streamcrf
