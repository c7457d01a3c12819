#include "streamcrf/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "parallel.hpp"

namespace streamcrf {

namespace {

std::size_t sz(long v) { return static_cast<std::size_t>(v); }

constexpr double kTermClamp = 1e6;
constexpr double kLogMuClamp = 80.0;

double clamp_term(double x, std::size_t& events) {
  if (x > kTermClamp) {
    ++events;
    return kTermClamp;
  }
  if (x < -kTermClamp) {
    ++events;
    return -kTermClamp;
  }
  return x;
}

// alpha_t for every label from the ring holding positions t-K .. t-1.
// Returns false when every entry collapsed to the sentinel.
bool alpha_step(const Potentials& pot, int b, int t, const RingBuffer& ring,
                std::vector<double>& terms, std::span<double> out) {
  bool alive = false;
  const int kmax = std::min(pot.K, t);
  for (int c = 0; c < pot.C; ++c) {
    terms.clear();
    for (int k = 1; k <= kmax; ++k) {
      const auto prev = ring.read(t - k);
      const double h = pot.segment_score(b, t, k, c);
      for (int cs = 0; cs < pot.C; ++cs) terms.push_back(prev[sz(cs)] + (h + pot.transition(cs, c)));
    }
    out[sz(c)] = log_sum_exp(terms);
    alive = alive || !is_neg_inf(out[sz(c)]);
  }
  return alive;
}

// Restores checkpoint `segment` of sequence b into `ring` and writes the
// forward rows for positions [segment * interval, end) into `block`.
int recompute_into(const Potentials& pot, const CheckpointSet& ck, int b, int segment,
                   RingBuffer& ring, Tensor& block, std::vector<double>& terms) {
  const int L = pot.lengths[sz(b)];
  const int t0 = segment * ck.interval;
  const int t1 = std::min(t0 + ck.interval, L);
  if (t0 >= t1) return 0;
  ring.restore(ck.omega->slice(b, segment), t0);
  std::copy_n(ring.read(t0).begin(), pot.C, block.slice(0).begin());
  for (int t = t0 + 1; t < t1; ++t) {
    auto row = block.slice(t - t0);
    alpha_step(pot, b, t, ring, terms, row);
    std::copy(row.begin(), row.end(), ring.write(t).begin());
  }
  return t1 - t0;
}

}  // namespace

RingBuffer::RingBuffer(int slots, int width, MemoryMeter* meter, bool instrument)
    : slots_(slots),
      width_(width),
      data_(meter, BufferKind::Ring, {sz(slots), sz(width)}, kNegInf),
      tags_(sz(slots), std::numeric_limits<long>::min()),
      instrument_(instrument) {
  if (slots < 1 || width < 1) throw ContractViolation("ring buffer needs slots >= 1 and width >= 1");
}

std::size_t RingBuffer::slot_of(long position) const {
  const long m = position % slots_;
  return sz(m < 0 ? m + slots_ : m);
}

std::span<double> RingBuffer::write(long position) {
  const std::size_t s = slot_of(position);
  tags_[s] = position;
  return data_->slice(s);
}

std::span<const double> RingBuffer::read(long position) const {
  const std::size_t s = slot_of(position);
  if (instrument_ && tags_[s] != position) ++hazards_;
  return std::as_const(*data_).slice(s);
}

void RingBuffer::restore(std::span<const double> state, long newest_position) {
  if (state.size() != data_->size()) throw ContractViolation("ring state has the wrong size");
  std::copy(state.begin(), state.end(), data_->data().begin());
  for (long p = newest_position - slots_ + 1; p <= newest_position; ++p) tags_[slot_of(p)] = p;
}

void RingBuffer::snapshot(std::span<double> out) const {
  if (out.size() != data_->size()) throw ContractViolation("ring snapshot has the wrong size");
  std::copy(data_->data().begin(), data_->data().end(), out.begin());
}

void RingBuffer::shift(double delta) {
  for (double& x : data_->data()) {
    if (!is_neg_inf(x)) x += delta;
  }
}

void RingBuffer::fill(double value) { data_->fill(value); }

int choose_checkpoint_interval(int T, int K) {
  if (T < 1 || K < 1) throw ContractViolation("checkpoint interval needs T >= 1 and K >= 1");
  const auto d = static_cast<long>(std::lround(std::sqrt(static_cast<double>(T) * K)));
  return static_cast<int>(std::clamp<long>(d, 1, T));
}

StreamingStats& StreamingStats::operator+=(const StreamingStats& o) {
  ring_hazards += o.ring_hazards;
  intermediate_clamps += o.intermediate_clamps;
  log_mu_upper_clamps += o.log_mu_upper_clamps;
  log_mu_lower_clamps += o.log_mu_lower_clamps;
  return *this;
}

ForwardResult streaming_forward(const Potentials& pot, const StreamingOptions& opts) {
  const int delta = opts.checkpoint_interval.value_or(choose_checkpoint_interval(pot.T, pot.K));
  if (delta < 1) throw ContractViolation("checkpoint interval must be >= 1");
  ForwardResult res;
  CheckpointSet& ck = res.checkpoints;
  ck.interval = delta;
  ck.count = (pot.T + delta - 1) / delta;
  ck.omega = TrackedTensor(opts.meter, BufferKind::Checkpoint,
                           {sz(pot.B), sz(ck.count), sz(pot.K), sz(pot.C)}, kNegInf);
  ck.norm = TrackedTensor(opts.meter, BufferKind::Checkpoint, {sz(pot.B), sz(ck.count)});
  res.log_z.assign(sz(pot.B), 0.0);
  std::vector<StreamingStats> stats(sz(pot.B));

  detail::parallel_for(pot.B, opts.threads, [&](int b) {
    const int L = pot.lengths[sz(b)];
    RingBuffer ring(pot.K, pot.C, opts.meter, opts.instrument);
    std::vector<double> terms, v(sz(pot.C));
    std::fill_n(ring.write(0).begin(), pot.C, 0.0);
    ring.snapshot(ck.omega->slice(b, 0));
    double accum = 0.0;
    for (int t = 1; t <= pot.T; ++t) {
      if (t <= L) {
        if (!alpha_step(pot, b, t, ring, terms, v)) {
          std::ostringstream os;
          os << "forward messages collapsed to -inf at (b=" << b << ", t=" << t << ")";
          throw NumericalError(os.str());
        }
        std::copy(v.begin(), v.end(), ring.write(t).begin());
      }
      if (t % delta != 0) continue;
      const double shift = t <= L ? *std::max_element(v.begin(), v.end()) : 0.0;
      accum += shift;
      ring.shift(-shift);
      if (const int n = t / delta; n < ck.count) {
        ring.snapshot(ck.omega->slice(b, n));
        (*ck.norm)(b, n) = accum;
      }
    }
    const double log_z = log_sum_exp(ring.read(L)) + accum;
    if (!std::isfinite(log_z)) {
      std::ostringstream os;
      os << "log-partition of sequence " << b << " is not finite";
      throw NumericalError(os.str());
    }
    res.log_z[sz(b)] = log_z;
    stats[sz(b)].ring_hazards = ring.hazards();
  });
  for (const auto& s : stats) res.stats += s;
  return res;
}

Tensor recompute_alpha(const Potentials& pot, const CheckpointSet& ck, int b, int segment) {
  if (b < 0 || b >= pot.B || segment < 0 || segment >= ck.count) {
    throw ContractViolation("recompute_alpha: sequence or segment index out of range");
  }
  const int L = pot.lengths[sz(b)];
  const int rows = std::max(0, std::min(ck.interval, L - segment * ck.interval));
  Tensor block({sz(rows), sz(pot.C)});
  RingBuffer ring(pot.K, pot.C, nullptr);
  std::vector<double> terms;
  recompute_into(pot, ck, b, segment, ring, block, terms);
  return block;
}

BackwardResult streaming_backward(const Potentials& pot, const ForwardResult& fwd,
                                  std::span<const double> upstream,
                                  const StreamingOptions& opts) {
  const CheckpointSet& ck = fwd.checkpoints;
  if (ck.count < 1 || ck.omega->rank() != 4 || ck.omega->dim(0) != sz(pot.B) ||
      ck.omega->dim(1) != sz(ck.count) || ck.omega->dim(2) != sz(pot.K) ||
      ck.omega->dim(3) != sz(pot.C) || fwd.log_z.size() != sz(pot.B) ||
      ck.count != (pot.T + ck.interval - 1) / ck.interval) {
    throw ContractViolation("streaming_backward: checkpoints missing or do not match the potentials");
  }
  if (!upstream.empty() && upstream.size() != sz(pot.B)) {
    throw ContractViolation("upstream must have one entry per sequence");
  }
  const int K = pot.K, C = pot.C, delta = ck.interval;
  BackwardResult res;
  res.gradients = GradientSet::zeros_like(pot);
  GradientSet& g = res.gradients;
  MarginalAccumulator acc(pot.B, pot.T, C, pot.lengths);
  TrackedTensor ws_trans(opts.meter, BufferKind::Workspace, {sz(pot.B), sz(ck.count), sz(C), sz(C)});
  TrackedTensor ws_dur(opts.meter, BufferKind::Workspace, {sz(pot.B), sz(ck.count), sz(K), sz(C)});
  std::vector<StreamingStats> stats(sz(pot.B));

  detail::parallel_for(pot.B, opts.threads, [&](int b) {
    const int L = pot.lengths[sz(b)];
    const double scale = upstream.empty() ? 1.0 : upstream[sz(b)];
    const double log_z = fwd.log_z[sz(b)];
    StreamingStats& st = stats[sz(b)];
    RingBuffer beta(2 * K, C, opts.meter, opts.instrument);
    RingBuffer fwd_ring(K, C, opts.meter, opts.instrument);
    TrackedTensor block(opts.meter, BufferKind::AlphaBlock, {sz(delta), sz(C)});
    std::vector<double> terms, h(sz(K) * sz(C)), y(sz(K) * sz(C)), mass(sz(K) * sz(C));
    std::vector<std::span<const double>> beta_rows(sz(K));

    // beta is held in the current segment's scale: beta + N_i - log Z, so
    // log mu = alpha_local + psi + beta_local stays O(1) on long sequences.
    const int last = (L - 1) / delta;
    std::fill_n(beta.write(L).begin(), C, (*ck.norm)(b, last) - log_z);

    for (int i = last; i >= 0; --i) {
      if (i != last) beta.shift((*ck.norm)(b, i) - (*ck.norm)(b, i + 1));
      const int t0 = i * delta;
      const int rows = recompute_into(pot, ck, b, i, fwd_ring, *block, terms);
      auto wt = ws_trans->slice(b, i);
      auto wd = ws_dur->slice(b, i);
      for (int s = t0 + rows - 1; s >= t0; --s) {
        const int kmax = std::min(K, L - s);
        for (int k = 1; k <= kmax; ++k) {
          beta_rows[sz(k - 1)] = beta.read(s + k);
          for (int c = 0; c < C; ++c) h[sz(k - 1) * sz(C) + sz(c)] = pot.segment_score(b, s + k, k, c);
        }
        std::fill(mass.begin(), mass.end(), 0.0);
        auto out = beta.write(s);
        const auto a = block->slice(s - t0);
        const std::size_t n = sz(kmax) * sz(C);
        for (int cs = 0; cs < C; ++cs) {
          double m = kNegInf;
          for (int k = 1; k <= kmax; ++k) {
            for (int c = 0; c < C; ++c) {
              const std::size_t j = sz(k - 1) * sz(C) + sz(c);
              const double psi = clamp_term(h[j] + pot.transition(cs, c), st.intermediate_clamps);
              y[j] = psi + clamp_term(beta_rows[sz(k - 1)][sz(c)], st.intermediate_clamps);
              m = std::max(m, y[j]);
            }
          }
          if (m < kNegInfGuard) {
            out[sz(cs)] = kNegInf;
            continue;
          }
          const double ac = clamp_term(a[sz(cs)], st.intermediate_clamps);
          const double scale_mu = std::exp(ac + m);
          double sum = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double e = std::exp(y[j] - m);
            sum += e;
            const double log_mu = ac + y[j];
            double mu;
            if (log_mu > kLogMuClamp) {
              ++st.log_mu_upper_clamps;
              mu = std::exp(kLogMuClamp);
            } else if (log_mu < -kLogMuClamp) {
              ++st.log_mu_lower_clamps;
              mu = std::exp(-kLogMuClamp);
            } else {
              mu = e * scale_mu;
            }
            mass[j] += mu;
            wt[sz(cs) * sz(C) + j % sz(C)] += mu;
          }
          out[sz(cs)] = m + std::log(sum);
        }
        for (int k = 1; k <= kmax; ++k) {
          for (int c = 0; c < C; ++c) {
            const double mu = mass[sz(k - 1) * sz(C) + sz(c)];
            wd[sz(k - 1) * sz(C) + sz(c)] += mu;
            g.cum(b, s + k, c) += scale * mu;
            g.cum(b, s, c) -= scale * mu;
            if (g.proj_start) {
              (*g.proj_start)(b, s, c) += scale * mu;
              (*g.proj_end)(b, s + k - 1, c) += scale * mu;
            }
            acc.add(b, s, k, c, mu);
          }
        }
      }
    }
    st.ring_hazards = beta.hazards() + fwd_ring.hazards();
  });

  // Fixed-order reduction: segments within a sequence, then sequences.
  std::vector<double> tr(sz(C) * sz(C)), du(sz(K) * sz(C));
  for (int b = 0; b < pot.B; ++b) {
    const double scale = upstream.empty() ? 1.0 : upstream[sz(b)];
    std::fill(tr.begin(), tr.end(), 0.0);
    std::fill(du.begin(), du.end(), 0.0);
    for (int i = 0; i < ck.count; ++i) {
      const auto wt = std::as_const(*ws_trans).slice(b, i);
      const auto wd = std::as_const(*ws_dur).slice(b, i);
      for (std::size_t j = 0; j < tr.size(); ++j) tr[j] += wt[j];
      for (std::size_t j = 0; j < du.size(); ++j) du[j] += wd[j];
    }
    for (std::size_t j = 0; j < tr.size(); ++j) g.transition.data()[j] += scale * tr[j];
    for (std::size_t j = 0; j < du.size(); ++j) g.duration_bias.data()[j] += scale * du[j];
    res.stats += stats[sz(b)];
  }
  res.marginals = acc.finish();
  return res;
}

std::vector<Decoded> streaming_viterbi(const Potentials& pot, const StreamingOptions& opts) {
  std::vector<Decoded> out(sz(pot.B));
  detail::parallel_for(pot.B, opts.threads, [&](int b) {
    const int L = pot.lengths[sz(b)];
    const int C = pot.C;
    RingBuffer ring(pot.K, C, opts.meter, opts.instrument);
    TrackedTensor back(opts.meter, BufferKind::Backpointers, {sz(L) + 1, sz(C), 2});
    std::vector<double> v(sz(C));
    std::fill_n(ring.write(0).begin(), C, 0.0);
    for (int t = 1; t <= L; ++t) {
      for (int c = 0; c < C; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_k = 0, best_c = 0;
        for (int k = std::min(pot.K, t); k >= 1; --k) {
          const auto prev = ring.read(t - k);
          const double h = pot.segment_score(b, t, k, c);
          for (int cs = 0; cs < C; ++cs) {
            const double val = prev[sz(cs)] + (h + pot.transition(cs, c));
            if (val > best) {
              best = val;
              best_k = k;
              best_c = cs;
            }
          }
        }
        v[sz(c)] = best;
        (*back)(t, c, 0) = best_k;
        (*back)(t, c, 1) = best_c;
      }
      std::copy(v.begin(), v.end(), ring.write(t).begin());
    }
    const auto last = ring.read(L);
    int label = 0;
    for (int c = 1; c < C; ++c) {
      if (last[sz(c)] > last[sz(label)]) label = c;
    }
    Decoded& d = out[sz(b)];
    d.score = last[sz(label)];
    for (int t = L; t > 0;) {
      const int k = static_cast<int>((*back)(t, label, 0));
      d.segmentation.push_back({t - k, k, label});
      label = static_cast<int>((*back)(t, label, 1));
      t -= k;
    }
    std::reverse(d.segmentation.begin(), d.segmentation.end());
  });
  return out;
}

}  // namespace streamcrf
