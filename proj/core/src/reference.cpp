#include "streamcrf/reference.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void check_guard(std::size_t need, std::size_t guard) {
  if (need <= guard) return;
  std::ostringstream os;
  os << "dense backend needs " << need << " bytes, above the guard of " << guard
     << " bytes; use the streaming backend for this size";
  throw GuardExceeded(os.str());
}

// Edge tensor for sequences [b0, b0 + nb): (nb, T, K, C, C), kNegInf where the
// segment is infeasible.
TrackedTensor materialize_edges(const Potentials& pot, int b0, int nb, MemoryMeter* meter) {
  TrackedTensor edges(meter, BufferKind::EdgeTensor,
                      {sz(nb), sz(pot.T), sz(pot.K), sz(pot.C), sz(pot.C)}, kNegInf);
  for (int i = 0; i < nb; ++i) {
    const int b = b0 + i;
    const int L = pot.lengths[sz(b)];
    for (int t = 1; t <= L; ++t) {
      for (int k = 1; k <= std::min(pot.K, t); ++k) {
        for (int c = 0; c < pot.C; ++c) {
          const double seg = pot.segment_score(b, t, k, c);
          for (int cs = 0; cs < pot.C; ++cs) {
            (*edges)(i, t - 1, k - 1, c, cs) = seg + pot.transition(cs, c);
          }
        }
      }
    }
  }
  return edges;
}

void check_enumeration_guard(const Potentials& pot, int b) {
  if (pot.lengths[sz(b)] > 12 || pot.K > 4 || pot.C > 4) {
    throw GuardExceeded("enumeration oracle is limited to L_b <= 12, K <= 4, C <= 4");
  }
}

template <typename Visit>
void enumerate_paths(const Potentials& pot, int b, int pos, int prev, double score,
                     Segmentation& seg, Visit&& visit) {
  const int L = pot.lengths[sz(b)];
  if (pos == L) {
    visit(score, seg);
    return;
  }
  for (int k = 1; k <= std::min(pot.K, L - pos); ++k) {
    for (int c = 0; c < pot.C; ++c) {
      const double step = pot.segment_score(b, pos + k, k, c) + pot.transition(prev, c);
      seg.push_back({pos, k, c});
      enumerate_paths(pot, b, pos + k, c, score + step, seg, visit);
      seg.pop_back();
    }
  }
}

}  // namespace

std::size_t default_dense_guard_bytes() {
  if (const char* env = std::getenv("STREAMCRF_GUARD_BYTES")) {
    try {
      return static_cast<std::size_t>(std::stoull(env));
    } catch (const std::exception&) {
      throw InputError("STREAMCRF_GUARD_BYTES must be a byte count");
    }
  }
  return std::size_t{2} << 30;
}

std::size_t dense_required_bytes(int B, int T, int K, int C, bool with_marginals) {
  const std::size_t edges = sz(B) * sz(T) * sz(K) * sz(C) * sz(C) * sizeof(double);
  const std::size_t messages = 2 * sz(B) * (sz(T) + 1) * sz(C) * sizeof(double);
  return edges + messages + (with_marginals ? edges : 0);
}

double enumerate_log_partition(const Potentials& pot, int b) {
  check_enumeration_guard(pot, b);
  // Two passes (max, then sum of exp(score - max)) keep the oracle accurate
  // to a few ulps even with millions of paths.
  double hi = -std::numeric_limits<double>::infinity();
  Segmentation seg;
  for (int c0 = 0; c0 < pot.C; ++c0) {
    enumerate_paths(pot, b, 0, c0, 0.0, seg,
                    [&](double score, const Segmentation&) { hi = std::max(hi, score); });
  }
  double sum = 0.0;
  for (int c0 = 0; c0 < pot.C; ++c0) {
    enumerate_paths(pot, b, 0, c0, 0.0, seg,
                    [&](double score, const Segmentation&) { sum += std::exp(score - hi); });
  }
  return hi + std::log(sum);
}

Decoded enumerate_best_path(const Potentials& pot, int b) {
  check_enumeration_guard(pot, b);
  Decoded best{{}, -std::numeric_limits<double>::infinity()};
  Segmentation seg;
  for (int c0 = 0; c0 < pot.C; ++c0) {
    enumerate_paths(pot, b, 0, c0, 0.0, seg, [&](double score, const Segmentation& s) {
      if (score > best.score) best = {s, score};
    });
  }
  return best;
}

DenseMessages dense_forward(const Potentials& pot, const DenseOptions& opts) {
  check_guard(dense_required_bytes(pot.B, pot.T, pot.K, pot.C, false), opts.guard_bytes);
  const TrackedTensor edges = materialize_edges(pot, 0, pot.B, opts.meter);
  TrackedTensor alpha(opts.meter, BufferKind::Messages, {sz(pot.B), sz(pot.T) + 1, sz(pot.C)},
                      kNegInf);
  DenseMessages msgs;
  msgs.log_z.assign(sz(pot.B), 0.0);
  std::vector<double> terms;
  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    for (int c = 0; c < pot.C; ++c) (*alpha)(b, 0, c) = 0.0;
    for (int t = 1; t <= L; ++t) {
      for (int c = 0; c < pot.C; ++c) {
        terms.clear();
        for (int k = 1; k <= std::min(pot.K, t); ++k) {
          for (int cs = 0; cs < pot.C; ++cs) {
            terms.push_back((*alpha)(b, t - k, cs) + (*edges)(b, t - 1, k - 1, c, cs));
          }
        }
        (*alpha)(b, t, c) = log_sum_exp(terms);
      }
    }
    msgs.log_z[sz(b)] = log_sum_exp((*alpha).slice(b, L));
  }
  msgs.alpha = *alpha;
  return msgs;
}

DensePosterior dense_backward_marginals(const Potentials& pot, DenseMessages& msgs,
                                        std::span<const double> upstream,
                                        const DenseOptions& opts) {
  check_guard(dense_required_bytes(pot.B, pot.T, pot.K, pot.C, true), opts.guard_bytes);
  if (msgs.alpha.empty() || msgs.log_z.size() != sz(pot.B)) {
    throw ContractViolation("dense_backward_marginals requires dense_forward output");
  }
  if (!upstream.empty() && upstream.size() != sz(pot.B)) {
    throw ContractViolation("upstream must have one entry per sequence");
  }
  const TrackedTensor edges = materialize_edges(pot, 0, pot.B, opts.meter);
  TrackedTensor beta(opts.meter, BufferKind::Messages, {sz(pot.B), sz(pot.T) + 1, sz(pot.C)},
                     kNegInf);
  TrackedTensor joint(opts.meter, BufferKind::JointMarginals,
                      {sz(pot.B), sz(pot.T), sz(pot.K), sz(pot.C), sz(pot.C)});
  DensePosterior out;
  out.gradients = GradientSet::zeros_like(pot);
  MarginalAccumulator acc(pot.B, pot.T, pot.C, pot.lengths);
  std::vector<double> terms;

  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    for (int c = 0; c < pot.C; ++c) (*beta)(b, L, c) = 0.0;
    for (int t = L - 1; t >= 0; --t) {
      for (int cs = 0; cs < pot.C; ++cs) {
        terms.clear();
        for (int k = 1; k <= std::min(pot.K, L - t); ++k) {
          for (int c = 0; c < pot.C; ++c) {
            terms.push_back((*edges)(b, t + k - 1, k - 1, c, cs) + (*beta)(b, t + k, c));
          }
        }
        (*beta)(b, t, cs) = log_sum_exp(terms);
      }
    }

    const double scale = upstream.empty() ? 1.0 : upstream[sz(b)];
    const double log_z = msgs.log_z[sz(b)];
    GradientSet& g = out.gradients;
    for (int t = 1; t <= L; ++t) {
      for (int k = 1; k <= std::min(pot.K, t); ++k) {
        for (int c = 0; c < pot.C; ++c) {
          double mass = 0.0;
          for (int cs = 0; cs < pot.C; ++cs) {
            const double mu = std::exp(msgs.alpha(b, t - k, cs) +
                                       (*edges)(b, t - 1, k - 1, c, cs) + (*beta)(b, t, c) -
                                       log_z);
            (*joint)(b, t - 1, k - 1, c, cs) = mu;
            g.transition(cs, c) += scale * mu;
            mass += mu;
          }
          g.cum(b, t, c) += scale * mass;
          g.cum(b, t - k, c) -= scale * mass;
          g.duration_bias(k - 1, c) += scale * mass;
          if (g.proj_start) {
            (*g.proj_start)(b, t - k, c) += scale * mass;
            (*g.proj_end)(b, t - 1, c) += scale * mass;
          }
          acc.add(b, t - k, k, c, mass);
        }
      }
    }
  }
  msgs.beta = *beta;
  out.joint = *joint;
  out.marginals = acc.finish();
  return out;
}

Decoded dense_viterbi(const Potentials& pot, int b, const DenseOptions& opts) {
  if (b < 0 || b >= pot.B) throw ContractViolation("dense_viterbi: batch index out of range");
  check_guard(dense_required_bytes(1, pot.T, pot.K, pot.C, false), opts.guard_bytes);
  const TrackedTensor edges = materialize_edges(pot, b, 1, opts.meter);
  const int L = pot.lengths[sz(b)];
  Tensor delta({sz(L) + 1, sz(pot.C)}, kNegInf);
  std::vector<int> back_k(sz(L + 1) * sz(pot.C), 0), back_c(sz(L + 1) * sz(pot.C), 0);
  for (int c = 0; c < pot.C; ++c) delta(0, c) = 0.0;
  for (int t = 1; t <= L; ++t) {
    for (int c = 0; c < pot.C; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      int best_k = 0, best_c = 0;
      for (int k = std::min(pot.K, t); k >= 1; --k) {
        for (int cs = 0; cs < pot.C; ++cs) {
          const double v = delta(t - k, cs) + (*edges)(0, t - 1, k - 1, c, cs);
          if (v > best) {
            best = v;
            best_k = k;
            best_c = cs;
          }
        }
      }
      delta(t, c) = best;
      back_k[sz(t) * sz(pot.C) + sz(c)] = best_k;
      back_c[sz(t) * sz(pot.C) + sz(c)] = best_c;
    }
  }
  int label = 0;
  for (int c = 1; c < pot.C; ++c) {
    if (delta(L, c) > delta(L, label)) label = c;
  }
  Decoded out;
  out.score = delta(L, label);
  for (int t = L; t > 0;) {
    const std::size_t i = sz(t) * sz(pot.C) + sz(label);
    const int k = back_k[i];
    out.segmentation.push_back({t - k, k, label});
    label = back_c[i];
    t -= k;
  }
  std::reverse(out.segmentation.begin(), out.segmentation.end());
  return out;
}

}  // namespace streamcrf
