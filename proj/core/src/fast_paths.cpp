#include "streamcrf/fast_paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void require_fast_path(const Potentials& pot, int k) {
  if (pot.K != k) {
    throw ContractViolation("K=" + std::to_string(k) + " fast path called with K=" +
                            std::to_string(pot.K));
  }
  if (pot.has_projections()) {
    throw ContractViolation("fast paths do not support boundary projections; dispatch to streaming");
  }
}

// alpha(t, c) for t = 0..L_b; history rows past L_b stay at the sentinel.
void history_forward(const Potentials& pot, int b, Tensor& alpha) {
  const int L = pot.lengths[sz(b)];
  const int C = pot.C;
  alpha.fill(kNegInf);
  for (int c = 0; c < C; ++c) alpha(0, c) = 0.0;
  std::vector<double> buf(2 * sz(C));
  for (int t = 1; t <= L; ++t) {
    for (int c = 0; c < C; ++c) {
      const double e1 = pot.segment_score(b, t, 1, c);
      std::size_t n = 0;
      for (int cs = 0; cs < C; ++cs) buf[n++] = alpha(t - 1, cs) + (e1 + pot.transition(cs, c));
      // The two-step history is invalid at t = 1.
      if (pot.K == 2 && t >= 2) {
        const double e2 = pot.segment_score(b, t, 2, c);
        for (int cs = 0; cs < C; ++cs) buf[n++] = alpha(t - 2, cs) + (e2 + pot.transition(cs, c));
      }
      alpha(t, c) = log_sum_exp(std::span<const double>(buf).first(n));
    }
  }
}

std::vector<double> fast_forward(const Potentials& pot, MemoryMeter* meter) {
  std::vector<double> log_z(sz(pot.B));
  TrackedTensor alpha(meter, BufferKind::AlphaHistory, {sz(pot.T) + 1, sz(pot.C)});
  for (int b = 0; b < pot.B; ++b) {
    history_forward(pot, b, *alpha);
    log_z[sz(b)] = log_sum_exp(alpha->slice(pot.lengths[sz(b)]));
  }
  return log_z;
}

std::vector<Decoded> fast_viterbi(const Potentials& pot, MemoryMeter* meter) {
  std::vector<Decoded> out(sz(pot.B));
  const int C = pot.C;
  TrackedTensor delta(meter, BufferKind::AlphaHistory, {sz(pot.T) + 1, sz(C)});
  TrackedTensor back(meter, BufferKind::Backpointers, {sz(pot.T) + 1, sz(C), 2});
  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    for (int c = 0; c < C; ++c) (*delta)(0, c) = 0.0;
    for (int t = 1; t <= L; ++t) {
      for (int c = 0; c < C; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_k = 0, best_c = 0;
        for (int k = std::min(pot.K, t); k >= 1; --k) {
          const double h = pot.segment_score(b, t, k, c);
          for (int cs = 0; cs < C; ++cs) {
            const double v = (*delta)(t - k, cs) + (h + pot.transition(cs, c));
            if (v > best) {
              best = v;
              best_k = k;
              best_c = cs;
            }
          }
        }
        (*delta)(t, c) = best;
        (*back)(t, c, 0) = best_k;
        (*back)(t, c, 1) = best_c;
      }
    }
    int label = 0;
    for (int c = 1; c < C; ++c) {
      if ((*delta)(L, c) > (*delta)(L, label)) label = c;
    }
    Decoded& d = out[sz(b)];
    d.score = (*delta)(L, label);
    for (int t = L; t > 0;) {
      const int k = static_cast<int>((*back)(t, label, 0));
      d.segmentation.push_back({t - k, k, label});
      label = static_cast<int>((*back)(t, label, 1));
      t -= k;
    }
    std::reverse(d.segmentation.begin(), d.segmentation.end());
  }
  return out;
}

}  // namespace

std::vector<double> k1_forward(const Potentials& pot, MemoryMeter* meter) {
  require_fast_path(pot, 1);
  return fast_forward(pot, meter);
}

std::vector<Decoded> k1_viterbi(const Potentials& pot, MemoryMeter* meter) {
  require_fast_path(pot, 1);
  return fast_viterbi(pot, meter);
}

std::vector<double> k2_forward(const Potentials& pot, MemoryMeter* meter) {
  require_fast_path(pot, 2);
  return fast_forward(pot, meter);
}

std::vector<Decoded> k2_viterbi(const Potentials& pot, MemoryMeter* meter) {
  require_fast_path(pot, 2);
  return fast_viterbi(pot, meter);
}

FastPosterior fast_path_posterior(const Potentials& pot, std::span<const double> upstream,
                                  MemoryMeter* meter) {
  require_fast_path(pot, pot.K == 1 ? 1 : 2);
  if (!upstream.empty() && upstream.size() != sz(pot.B)) {
    throw ContractViolation("upstream must have one entry per sequence");
  }
  const int C = pot.C;
  FastPosterior out;
  out.log_z.assign(sz(pot.B), 0.0);
  out.gradients = GradientSet::zeros_like(pot);
  GradientSet& g = out.gradients;
  MarginalAccumulator acc(pot.B, pot.T, C, pot.lengths);
  TrackedTensor alpha(meter, BufferKind::AlphaHistory, {sz(pot.T) + 1, sz(C)});
  TrackedTensor beta(meter, BufferKind::AlphaHistory, {sz(pot.T) + 1, sz(C)});
  std::vector<double> terms;

  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    const double scale = upstream.empty() ? 1.0 : upstream[sz(b)];
    history_forward(pot, b, *alpha);
    const double log_z = log_sum_exp(alpha->slice(L));
    out.log_z[sz(b)] = log_z;

    for (int c = 0; c < C; ++c) (*beta)(L, c) = 0.0;
    for (int t = L - 1; t >= 0; --t) {
      for (int cs = 0; cs < C; ++cs) {
        terms.clear();
        for (int k = 1; k <= std::min(pot.K, L - t); ++k) {
          for (int c = 0; c < C; ++c) {
            terms.push_back(pot.segment_score(b, t + k, k, c) + pot.transition(cs, c) +
                            (*beta)(t + k, c));
          }
        }
        (*beta)(t, cs) = log_sum_exp(terms);
      }
    }

    for (int t = 1; t <= L; ++t) {
      for (int k = 1; k <= std::min(pot.K, t); ++k) {
        for (int c = 0; c < C; ++c) {
          const double h = pot.segment_score(b, t, k, c);
          double mass = 0.0;
          for (int cs = 0; cs < C; ++cs) {
            const double mu =
                std::exp((*alpha)(t - k, cs) + (h + pot.transition(cs, c)) + (*beta)(t, c) - log_z);
            g.transition(cs, c) += scale * mu;
            mass += mu;
          }
          g.cum(b, t, c) += scale * mass;
          g.cum(b, t - k, c) -= scale * mass;
          g.duration_bias(k - 1, c) += scale * mass;
          acc.add(b, t - k, k, c, mass);
        }
      }
    }
  }
  out.marginals = acc.finish();
  return out;
}

}  // namespace streamcrf
