#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "streamcrf/marginals.hpp"
#include "streamcrf/memory.hpp"
#include "streamcrf/potentials.hpp"
#include "streamcrf/reference.hpp"

namespace streamcrf {

/// Raised when a recursion collapses to the -inf sentinel everywhere.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed number of C-wide message slots addressed by position modulo the
/// slot count. When instrumented, every slot remembers which position it
/// holds and reads of any other position are counted as hazards.
class RingBuffer {
 public:
  RingBuffer(int slots, int width, MemoryMeter* meter, bool instrument = false);

  [[nodiscard]] int slots() const { return slots_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t hazards() const { return hazards_; }

  std::span<double> write(long position);
  [[nodiscard]] std::span<const double> read(long position) const;

  /// Loads a saved state whose newest entry is `newest_position`.
  void restore(std::span<const double> state, long newest_position);
  void snapshot(std::span<double> out) const;

  /// Adds `delta` to every entry that is not the -inf sentinel.
  void shift(double delta);
  void fill(double value);

 private:
  [[nodiscard]] std::size_t slot_of(long position) const;

  int slots_;
  int width_;
  TrackedTensor data_;
  std::vector<long> tags_;
  bool instrument_;
  mutable std::size_t hazards_ = 0;
};

/// Delta = round(sqrt(T * K)), at least 1 and at most T.
int choose_checkpoint_interval(int T, int K);

/// Saved forward rings and cumulative log-normalizers, one per checkpoint
/// segment [i * interval, (i + 1) * interval).
struct CheckpointSet {
  int interval = 1;
  int count = 0;        // ceil(T / interval)
  TrackedTensor omega;  // (B, count, K, C) ring contents, slot-major
  TrackedTensor norm;   // (B, count) accumulated shift at the segment start
};

struct StreamingOptions {
  std::optional<int> checkpoint_interval;  // defaults to choose_checkpoint_interval
  MemoryMeter* meter = nullptr;
  int threads = 1;
  bool instrument = false;  // tag ring slots and count hazards
};

/// Event counters; intermediate clamps should never fire on sane inputs.
struct StreamingStats {
  std::size_t ring_hazards = 0;
  std::size_t intermediate_clamps = 0;  // alpha/psi/beta term outside [-1e6, 1e6]
  std::size_t log_mu_upper_clamps = 0;  // log mu above 80
  std::size_t log_mu_lower_clamps = 0;  // log mu below -80

  StreamingStats& operator+=(const StreamingStats& o);
};

struct ForwardResult {
  std::vector<double> log_z;
  CheckpointSet checkpoints;
  StreamingStats stats;
};

ForwardResult streaming_forward(const Potentials& pot, const StreamingOptions& opts = {});

/// Forward messages for positions [i * interval, min((i + 1) * interval, L_b))
/// of sequence b, rebuilt from checkpoint i. Rows are in the checkpoint's
/// scale: add norm(b, i) to recover absolute log-forward values.
Tensor recompute_alpha(const Potentials& pot, const CheckpointSet& ckpts, int b, int segment);

struct BackwardResult {
  GradientSet gradients;
  MarginalSet marginals;
  StreamingStats stats;
};

/// Gradients of sum_b upstream[b] * log Z_b (upstream defaults to ones) and
/// posterior marginals. Gradient workspaces are kept per (sequence, segment)
/// and reduced in a fixed order, so results are bit-reproducible.
BackwardResult streaming_backward(const Potentials& pot, const ForwardResult& forward,
                                  std::span<const double> upstream = {},
                                  const StreamingOptions& opts = {});

/// Max-semiring scan with a K-slot ring and per-(t, c) backpointers.
/// Same tie-breaking as dense_viterbi.
std::vector<Decoded> streaming_viterbi(const Potentials& pot, const StreamingOptions& opts = {});

}  // namespace streamcrf
