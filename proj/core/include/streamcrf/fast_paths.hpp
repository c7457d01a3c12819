#pragma once

#include <span>
#include <vector>

#include "streamcrf/marginals.hpp"
#include "streamcrf/memory.hpp"
#include "streamcrf/potentials.hpp"
#include "streamcrf/reference.hpp"

// Specialized recursions for K = 1 (a linear-chain CRF) and K = 2. Both keep
// the full forward history, O(B T C) doubles, instead of checkpointing.
// Calling them with boundary projections or another K is a contract violation.

namespace streamcrf {

std::vector<double> k1_forward(const Potentials& pot, MemoryMeter* meter = nullptr);
std::vector<Decoded> k1_viterbi(const Potentials& pot, MemoryMeter* meter = nullptr);

std::vector<double> k2_forward(const Potentials& pot, MemoryMeter* meter = nullptr);
std::vector<Decoded> k2_viterbi(const Potentials& pot, MemoryMeter* meter = nullptr);

struct FastPosterior {
  std::vector<double> log_z;
  GradientSet gradients;
  MarginalSet marginals;
};

/// Forward with full history, then the standard backward. K must be 1 or 2.
FastPosterior fast_path_posterior(const Potentials& pot, std::span<const double> upstream = {},
                                  MemoryMeter* meter = nullptr);

}  // namespace streamcrf
