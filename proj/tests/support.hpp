#pragma once

// Test-side oracles. Everything here works from raw emissions and parameters
// by direct summation; nothing goes through prefix sums or library DP code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "streamcrf/datagen.hpp"
#include "streamcrf/potentials.hpp"

namespace testing_support {

using streamcrf::EmissionBatch;
using streamcrf::Segment;
using streamcrf::Segmentation;
using streamcrf::SemiCrfParams;

/// Score of [s, s + k) labelled c, without the entering transition.
inline double direct_segment(const EmissionBatch& em, const SemiCrfParams& p, int b, int s, int k,
                             int c) {
  const int L = em.lengths[static_cast<std::size_t>(b)];
  double v = 0.0;
  for (int t = s; t < s + k; ++t) v += em.scores(b, t, c);
  v += p.duration_bias(k - 1, c);
  if (p.proj_start) v += (*p.proj_start)(b, s, c);
  if (p.proj_end) v += (*p.proj_end)(b, s + k - 1, c);
  if (p.pi_start && s == 0) v += (*p.pi_start)[static_cast<std::size_t>(c)];
  if (p.pi_end && s + k == L) v += (*p.pi_end)[static_cast<std::size_t>(c)];
  return v;
}

/// Path score entered from an explicit source label.
inline double direct_path(const EmissionBatch& em, const SemiCrfParams& p, int b,
                          const Segmentation& seg, int source) {
  double v = 0.0;
  int prev = source;
  for (const Segment& s : seg) {
    v += p.transition(prev, s.label) + direct_segment(em, p, b, s.start, s.duration, s.label);
    prev = s.label;
  }
  return v;
}

/// Visits every labelled segmentation of [0, L) with durations <= K.
inline void for_each_path(int L, int K, int C, const std::function<void(const Segmentation&)>& fn) {
  Segmentation cur;
  std::function<void(int)> rec = [&](int pos) {
    if (pos == L) {
      fn(cur);
      return;
    }
    for (int k = 1; k <= std::min(K, L - pos); ++k) {
      for (int c = 0; c < C; ++c) {
        cur.push_back({pos, k, c});
        rec(pos + k);
        cur.pop_back();
      }
    }
  };
  rec(0);
}

struct Enumerated {
  double log_z = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t paths = 0;  // labelled segmentations, sources not counted
};

/// Exhaustive log-partition and max score, both over the virtual source.
inline Enumerated enumerate(const EmissionBatch& em, const SemiCrfParams& p, int b) {
  const int L = em.lengths[static_cast<std::size_t>(b)];
  const int C = p.num_labels;
  std::vector<double> scores;
  Enumerated out;
  for_each_path(L, p.max_duration, C, [&](const Segmentation& seg) {
    ++out.paths;
    for (int src = 0; src < C; ++src) scores.push_back(direct_path(em, p, b, seg, src));
  });
  const double hi = *std::max_element(scores.begin(), scores.end());
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - hi);
  out.log_z = hi + std::log(acc);
  out.best = hi;
  return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

/// Zero-parameter instance with the given emissions (None centering keeps them raw).
inline streamcrf::RandomInstance zero_instance(int B, int T, int K, int C) {
  streamcrf::RandomInstance inst;
  inst.dims = {B, T, K, C};
  inst.emissions.scores = streamcrf::Tensor({static_cast<std::size_t>(B), static_cast<std::size_t>(T),
                                             static_cast<std::size_t>(C)});
  inst.emissions.lengths.assign(static_cast<std::size_t>(B), T);
  inst.params = SemiCrfParams::zeros(C, K);
  return inst;
}

/// Hand-rolled generator for property tests; independent of the library's Rng.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }

  /// Random tiling of [0, L) with durations <= K and labels < C.
  Segmentation segmentation(int L, int K, int C) {
    Segmentation seg;
    int pos = 0;
    while (pos < L) {
      const int k = integer(1, std::min(K, L - pos));
      seg.push_back({pos, k, integer(0, C - 1)});
      pos += k;
    }
    return seg;
  }

 private:
  std::mt19937 eng_;
};

}  // namespace testing_support
