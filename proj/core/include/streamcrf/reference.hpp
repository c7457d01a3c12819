#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "streamcrf/marginals.hpp"
#include "streamcrf/memory.hpp"
#include "streamcrf/potentials.hpp"

// Dense textbook semi-CRF inference. Materializes the full (B, T, K, C, C)
// edge tensor and full message arrays; it exists to be simple and serve as the
// oracle for the streaming backend.

namespace streamcrf {

struct Decoded {
  Segmentation segmentation;
  double score = 0.0;
};

/// 2 GiB unless STREAMCRF_GUARD_BYTES is set.
std::size_t default_dense_guard_bytes();

/// Bytes the dense backend would allocate (edge tensor + messages, plus the
/// joint marginal tensor when `with_marginals`).
std::size_t dense_required_bytes(int B, int T, int K, int C, bool with_marginals);

struct DenseOptions {
  std::size_t guard_bytes = default_dense_guard_bytes();
  MemoryMeter* meter = nullptr;
};

struct DenseMessages {
  Tensor alpha;  // (B, T+1, C); kNegInf past L_b
  Tensor beta;   // (B, T+1, C); empty until a backward pass fills it
  std::vector<double> log_z;
};

struct DensePosterior {
  Tensor joint;  // (B, T, K, C, C): mu(b, t-1, k-1, c, c_src) for segments [t-k, t)
  GradientSet gradients;
  MarginalSet marginals;
};

/// Exhaustive log-partition over (virtual source, segmentation, labelling)
/// triples. Refuses L_b > 12, K > 4 or C > 4.
double enumerate_log_partition(const Potentials& pot, int b);

/// Exhaustive maximum path score (max over the virtual source too).
Decoded enumerate_best_path(const Potentials& pot, int b);

DenseMessages dense_forward(const Potentials& pot, const DenseOptions& opts = {});

/// Fills msgs.beta, then returns joint marginals, gradients of
/// sum_b upstream[b] * log Z_b (upstream defaults to ones) and position marginals.
DensePosterior dense_backward_marginals(const Potentials& pot, DenseMessages& msgs,
                                        std::span<const double> upstream = {},
                                        const DenseOptions& opts = {});

/// Max-semiring recursion over the dense edge tensor. Ties prefer the longer
/// duration, then the smaller source label; the final label tie goes to the
/// smaller index.
Decoded dense_viterbi(const Potentials& pot, int b, const DenseOptions& opts = {});

}  // namespace streamcrf
