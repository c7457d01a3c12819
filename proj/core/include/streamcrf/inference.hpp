#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "streamcrf/marginals.hpp"
#include "streamcrf/memory.hpp"
#include "streamcrf/potentials.hpp"
#include "streamcrf/reference.hpp"
#include "streamcrf/streaming.hpp"

namespace streamcrf {

enum class BackendKind { LinearK1, NearLinearK2, Streaming };

std::string_view to_string(BackendKind kind);

/// Picks the recursion by maximum duration. Boundary projections force the
/// generic streaming path; scalar boundaries are folded and never matter.
BackendKind dispatch(const SemiCrfParams& params);
BackendKind dispatch(const Potentials& pot);

/// User-facing backend choice. Auto follows dispatch(); Streaming always
/// runs the generic checkpointed scan.
enum class Backend { Auto, Dense, Streaming };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

struct InferenceOptions {
  Backend backend = Backend::Auto;
  std::optional<int> checkpoint_interval;
  int threads = 1;
  MemoryMeter* meter = nullptr;
  std::size_t guard_bytes = default_dense_guard_bytes();
};

struct Posterior {
  std::vector<double> log_z;
  GradientSet gradients;
  MarginalSet marginals;
  StreamingStats stats;  // empty unless the streaming scan ran
};

std::vector<double> log_partition(const Potentials& pot, const InferenceOptions& opts = {});

/// log Z, gradients of sum_b upstream[b] * log Z_b and posterior marginals.
Posterior posterior(const Potentials& pot, std::span<const double> upstream = {},
                    const InferenceOptions& opts = {});

std::vector<Decoded> decode(const Potentials& pot, const InferenceOptions& opts = {});

}  // namespace streamcrf
