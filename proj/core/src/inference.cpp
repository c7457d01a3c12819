#include "streamcrf/inference.hpp"

#include <string>

#include "streamcrf/fast_paths.hpp"

namespace streamcrf {

namespace {

BackendKind dispatch_by(int K, bool projections) {
  if (projections) return BackendKind::Streaming;
  if (K == 1) return BackendKind::LinearK1;
  if (K == 2) return BackendKind::NearLinearK2;
  return BackendKind::Streaming;
}

StreamingOptions streaming_options(const InferenceOptions& opts) {
  StreamingOptions s;
  s.checkpoint_interval = opts.checkpoint_interval;
  s.meter = opts.meter;
  s.threads = opts.threads;
  return s;
}

DenseOptions dense_options(const InferenceOptions& opts) { return {opts.guard_bytes, opts.meter}; }

bool use_fast_path(const Potentials& pot, const InferenceOptions& opts) {
  return opts.backend == Backend::Auto && dispatch(pot) != BackendKind::Streaming;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::LinearK1: return "linear-k1";
    case BackendKind::NearLinearK2: return "near-linear-k2";
    case BackendKind::Streaming: return "streaming";
  }
  return "unknown";
}

BackendKind dispatch(const SemiCrfParams& params) {
  return dispatch_by(params.max_duration, params.has_projections());
}

BackendKind dispatch(const Potentials& pot) { return dispatch_by(pot.K, pot.has_projections()); }

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::Auto: return "auto";
    case Backend::Dense: return "dense";
    case Backend::Streaming: return "streaming";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "auto") return Backend::Auto;
  if (name == "dense") return Backend::Dense;
  if (name == "streaming") return Backend::Streaming;
  throw InputError("unknown backend '" + std::string(name) + "' (expected dense, streaming or auto)");
}

std::vector<double> log_partition(const Potentials& pot, const InferenceOptions& opts) {
  if (opts.backend == Backend::Dense) return dense_forward(pot, dense_options(opts)).log_z;
  if (use_fast_path(pot, opts)) {
    return pot.K == 1 ? k1_forward(pot, opts.meter) : k2_forward(pot, opts.meter);
  }
  return streaming_forward(pot, streaming_options(opts)).log_z;
}

Posterior posterior(const Potentials& pot, std::span<const double> upstream,
                    const InferenceOptions& opts) {
  Posterior out;
  if (opts.backend == Backend::Dense) {
    const DenseOptions d = dense_options(opts);
    DenseMessages msgs = dense_forward(pot, d);
    DensePosterior post = dense_backward_marginals(pot, msgs, upstream, d);
    out.log_z = std::move(msgs.log_z);
    out.gradients = std::move(post.gradients);
    out.marginals = std::move(post.marginals);
    return out;
  }
  if (use_fast_path(pot, opts)) {
    FastPosterior fast = fast_path_posterior(pot, upstream, opts.meter);
    out.log_z = std::move(fast.log_z);
    out.gradients = std::move(fast.gradients);
    out.marginals = std::move(fast.marginals);
    return out;
  }
  const StreamingOptions s = streaming_options(opts);
  ForwardResult fwd = streaming_forward(pot, s);
  BackwardResult bwd = streaming_backward(pot, fwd, upstream, s);
  out.log_z = std::move(fwd.log_z);
  out.gradients = std::move(bwd.gradients);
  out.marginals = std::move(bwd.marginals);
  out.stats = fwd.stats;
  out.stats += bwd.stats;
  return out;
}

std::vector<Decoded> decode(const Potentials& pot, const InferenceOptions& opts) {
  if (opts.backend == Backend::Dense) {
    std::vector<Decoded> out;
    for (int b = 0; b < pot.B; ++b) out.push_back(dense_viterbi(pot, b, dense_options(opts)));
    return out;
  }
  if (use_fast_path(pot, opts)) {
    return pot.K == 1 ? k1_viterbi(pot, opts.meter) : k2_viterbi(pot, opts.meter);
  }
  return streaming_viterbi(pot, streaming_options(opts));
}

}  // namespace streamcrf
