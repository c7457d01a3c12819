#include "streamcrf/marginals.hpp"

namespace streamcrf {

MarginalAccumulator::MarginalAccumulator(int B, int T, int C, std::vector<int> lengths)
    : lengths_(std::move(lengths)),
      cover_delta_({static_cast<std::size_t>(B), static_cast<std::size_t>(T) + 1,
                    static_cast<std::size_t>(C)}),
      boundary_({static_cast<std::size_t>(B), static_cast<std::size_t>(T)}) {}

MarginalSet MarginalAccumulator::finish() const {
  const auto B = cover_delta_.dim(0), T = cover_delta_.dim(1) - 1, C = cover_delta_.dim(2);
  MarginalSet out;
  out.position = Tensor({B, T, C});
  out.boundary = boundary_;
  out.expected_segments.assign(B, 0.0);
  out.lengths = lengths_;
  for (std::size_t b = 0; b < B; ++b) {
    const auto L = static_cast<std::size_t>(lengths_[b]);
    for (std::size_t c = 0; c < C; ++c) {
      double running = 0.0;
      for (std::size_t t = 0; t < L; ++t) {
        running += cover_delta_(b, t, c);
        out.position(b, t, c) = running;
      }
    }
    // Padded positions are left at exactly zero.
    for (std::size_t t = 0; t < L; ++t) out.expected_segments[b] += boundary_(b, t);
  }
  return out;
}

}  // namespace streamcrf
