#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <string_view>
#include <vector>

#include "streamcrf/numeric.hpp"

namespace streamcrf {

/// Kinds of dynamic-programming working storage tracked by MemoryMeter.
enum class BufferKind : std::size_t {
  Ring = 0,        // forward (K slots) and backward (2K slots) message rings
  Checkpoint,      // saved rings and cumulative normalizers
  AlphaBlock,      // per-segment recomputed forward block
  Workspace,       // per-(sequence, segment) gradient workspaces
  EdgeTensor,      // dense backend's materialized potentials
  Messages,        // dense backend's full alpha/beta
  AlphaHistory,    // fast paths' full alpha history
  Backpointers,    // Viterbi traceback tables
  JointMarginals,  // dense backend's joint segment marginals
  Count
};

std::string_view to_string(BufferKind kind);

/// Counts live and peak bytes of DP buffers by kind. Thread-safe.
class MemoryMeter {
 public:
  static constexpr std::size_t kKinds = static_cast<std::size_t>(BufferKind::Count);

  void acquire(BufferKind kind, std::size_t bytes);
  void release(BufferKind kind, std::size_t bytes);

  [[nodiscard]] std::size_t current(BufferKind kind) const;
  [[nodiscard]] std::size_t peak(BufferKind kind) const;
  /// Peak of the sum over all kinds (not the sum of per-kind peaks).
  [[nodiscard]] std::size_t peak_total() const { return peak_total_.load(); }
  /// Largest single allocation of a kind; rings are sized per sequence.
  [[nodiscard]] std::size_t largest(BufferKind kind) const;

  void reset();

 private:
  std::array<std::atomic<std::size_t>, kKinds> current_{};
  std::array<std::atomic<std::size_t>, kKinds> peak_{};
  std::array<std::atomic<std::size_t>, kKinds> largest_{};
  std::atomic<std::size_t> current_total_{0};
  std::atomic<std::size_t> peak_total_{0};
};

/// A tensor whose lifetime is reported to an optional MemoryMeter.
class TrackedTensor {
 public:
  TrackedTensor() = default;
  TrackedTensor(MemoryMeter* meter, BufferKind kind, std::vector<std::size_t> shape,
                double fill = 0.0);
  ~TrackedTensor();
  TrackedTensor(TrackedTensor&& other) noexcept;
  TrackedTensor& operator=(TrackedTensor&& other) noexcept;
  TrackedTensor(const TrackedTensor&) = delete;
  TrackedTensor& operator=(const TrackedTensor&) = delete;

  Tensor& operator*() { return tensor_; }
  const Tensor& operator*() const { return tensor_; }
  Tensor* operator->() { return &tensor_; }
  const Tensor* operator->() const { return &tensor_; }

 private:
  void release();

  MemoryMeter* meter_ = nullptr;
  BufferKind kind_ = BufferKind::Ring;
  Tensor tensor_;
};

}  // namespace streamcrf
