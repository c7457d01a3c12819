#include "streamcrf/memory.hpp"

namespace streamcrf {

namespace {

void raise_to(std::atomic<std::size_t>& target, std::size_t value) {
  std::size_t seen = target.load();
  while (seen < value && !target.compare_exchange_weak(seen, value)) {
  }
}

}  // namespace

std::string_view to_string(BufferKind kind) {
  switch (kind) {
    case BufferKind::Ring: return "ring";
    case BufferKind::Checkpoint: return "checkpoint";
    case BufferKind::AlphaBlock: return "alpha_block";
    case BufferKind::Workspace: return "workspace";
    case BufferKind::EdgeTensor: return "edge_tensor";
    case BufferKind::Messages: return "messages";
    case BufferKind::AlphaHistory: return "alpha_history";
    case BufferKind::Backpointers: return "backpointers";
    case BufferKind::JointMarginals: return "joint_marginals";
    case BufferKind::Count: break;
  }
  return "unknown";
}

void MemoryMeter::acquire(BufferKind kind, std::size_t bytes) {
  const auto i = static_cast<std::size_t>(kind);
  raise_to(peak_[i], current_[i].fetch_add(bytes) + bytes);
  raise_to(largest_[i], bytes);
  raise_to(peak_total_, current_total_.fetch_add(bytes) + bytes);
}

void MemoryMeter::release(BufferKind kind, std::size_t bytes) {
  current_[static_cast<std::size_t>(kind)].fetch_sub(bytes);
  current_total_.fetch_sub(bytes);
}

std::size_t MemoryMeter::current(BufferKind kind) const {
  return current_[static_cast<std::size_t>(kind)].load();
}

std::size_t MemoryMeter::peak(BufferKind kind) const {
  return peak_[static_cast<std::size_t>(kind)].load();
}

std::size_t MemoryMeter::largest(BufferKind kind) const {
  return largest_[static_cast<std::size_t>(kind)].load();
}

void MemoryMeter::reset() {
  for (std::size_t i = 0; i < kKinds; ++i) {
    current_[i] = 0;
    peak_[i] = 0;
    largest_[i] = 0;
  }
  current_total_ = 0;
  peak_total_ = 0;
}

TrackedTensor::TrackedTensor(MemoryMeter* meter, BufferKind kind,
                             std::vector<std::size_t> shape, double fill)
    : meter_(meter), kind_(kind), tensor_(std::move(shape), fill) {
  if (meter_ != nullptr) meter_->acquire(kind_, tensor_.bytes());
}

TrackedTensor::~TrackedTensor() { release(); }

void TrackedTensor::release() {
  if (meter_ != nullptr) meter_->release(kind_, tensor_.bytes());
  meter_ = nullptr;
}

TrackedTensor& TrackedTensor::operator=(TrackedTensor&& other) noexcept {
  if (this != &other) {
    release();
    meter_ = other.meter_;
    kind_ = other.kind_;
    tensor_ = std::move(other.tensor_);
    other.meter_ = nullptr;
  }
  return *this;
}

TrackedTensor::TrackedTensor(TrackedTensor&& other) noexcept
    : meter_(other.meter_), kind_(other.kind_), tensor_(std::move(other.tensor_)) {
  other.meter_ = nullptr;
}

}  // namespace streamcrf
