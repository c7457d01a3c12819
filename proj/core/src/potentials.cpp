#include "streamcrf/potentials.hpp"

#include <sstream>

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

void check_lengths(const std::vector<int>& lengths, int B, int T) {
  require(static_cast<int>(lengths.size()) == B, "lengths must have one entry per sequence");
  for (int b = 0; b < B; ++b) {
    if (lengths[sz(b)] < 1 || lengths[sz(b)] > T) {
      std::ostringstream os;
      os << "length of sequence " << b << " is " << lengths[sz(b)] << ", expected 1.." << T;
      throw InputError(os.str());
    }
  }
}

void check_matrix(const Tensor& m, std::size_t rows, std::size_t cols, const char* name) {
  std::ostringstream os;
  if (m.rank() != 2 || m.dim(0) != rows || m.dim(1) != cols) {
    os << name << " must have shape (" << rows << ", " << cols << ")";
    throw InputError(os.str());
  }
  for (double v : m.data()) {
    if (!std::isfinite(v)) {
      os << name << " contains a non-finite entry";
      throw InputError(os.str());
    }
  }
}

}  // namespace

void validate(const EmissionBatch& em) {
  require(em.scores.rank() == 3, "emission scores must be a (B, T, C) tensor");
  require(em.batch() >= 1 && em.length() >= 1 && em.labels() >= 1,
          "emission tensor must be non-empty");
  check_lengths(em.lengths, em.batch(), em.length());
  for (int b = 0; b < em.batch(); ++b) {
    for (int t = 0; t < em.lengths[sz(b)]; ++t) {
      for (int c = 0; c < em.labels(); ++c) {
        if (!std::isfinite(em.scores(b, t, c))) {
          std::ostringstream os;
          os << "non-finite emission at (b=" << b << ", t=" << t << ", c=" << c << ")";
          throw InputError(os.str());
        }
      }
    }
  }
}

std::string_view to_string(CenteringMode mode) {
  switch (mode) {
    case CenteringMode::Mean: return "mean";
    case CenteringMode::None: return "none";
    case CenteringMode::SharedMax: return "shared-max";
  }
  return "unknown";
}

CenteringMode parse_centering(std::string_view name) {
  if (name == "mean") return CenteringMode::Mean;
  if (name == "none") return CenteringMode::None;
  if (name == "shared-max" || name == "sharedmax" || name == "max") return CenteringMode::SharedMax;
  throw InputError("unknown centering mode '" + std::string(name) + "'");
}

SemiCrfParams SemiCrfParams::zeros(int num_labels, int max_duration) {
  SemiCrfParams p;
  p.num_labels = num_labels;
  p.max_duration = max_duration;
  p.transition = Tensor({sz(num_labels), sz(num_labels)});
  p.duration_bias = Tensor({sz(max_duration), sz(num_labels)});
  return p;
}

void SemiCrfParams::validate() const {
  require(num_labels >= 1, "label count C must be >= 1");
  require(max_duration >= 1, "max duration K must be >= 1");
  check_matrix(transition, sz(num_labels), sz(num_labels), "transition");
  check_matrix(duration_bias, sz(max_duration), sz(num_labels), "duration_bias");
  for (const auto* pi : {&pi_start, &pi_end}) {
    if (!pi->has_value()) continue;
    require((*pi)->size() == sz(num_labels), "boundary vectors must have C entries");
    for (double v : **pi) require(std::isfinite(v), "boundary vector contains a non-finite entry");
  }
  for (const auto* proj : {&proj_start, &proj_end}) {
    if (!proj->has_value()) continue;
    require((*proj)->rank() == 3 && (*proj)->dim(2) == sz(num_labels),
            "boundary projections must be (B, T, C)");
    for (double v : (*proj)->data()) {
      require(std::isfinite(v), "boundary projection contains a non-finite entry");
    }
  }
  if (proj_start && proj_end) {
    require(proj_start->shape() == proj_end->shape(),
            "start and end projections must have the same shape");
  }
}

void validate_segmentation(const Segmentation& seg, int length, int max_duration,
                           int num_labels) {
  std::ostringstream os;
  if (seg.empty()) {
    os << "segmentation is empty but must cover [0, " << length << ")";
    throw InputError(os.str());
  }
  int expected = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const Segment& s = seg[i];
    if (s.start != expected) {
      os << "segment " << i << " starts at " << s.start << ", expected " << expected;
      throw InputError(os.str());
    }
    if (s.duration < 1 || s.duration > max_duration) {
      os << "segment " << i << " has duration " << s.duration << ", expected 1.."
         << max_duration;
      throw InputError(os.str());
    }
    if (s.label < 0 || s.label >= num_labels) {
      os << "segment " << i << " has label " << s.label << ", expected 0.." << num_labels - 1;
      throw InputError(os.str());
    }
    expected = s.end();
    if (expected > length) {
      os << "segment " << i << " ends at " << expected << ", past the length " << length;
      throw InputError(os.str());
    }
  }
  if (expected != length) {
    os << "segmentation ends at " << expected << " but the sequence length is " << length;
    throw InputError(os.str());
  }
}

GradientSet GradientSet::zeros_like(const Potentials& pot) {
  GradientSet g;
  g.cum = Tensor(pot.cum.shape());
  g.transition = Tensor(pot.transition.shape());
  g.duration_bias = Tensor(pot.duration_bias.shape());
  if (pot.proj_start) {
    g.proj_start = Tensor(pot.proj_start->shape());
    g.proj_end = Tensor(pot.proj_end->shape());
  }
  return g;
}

CenteredEmissions center_emissions(const EmissionBatch& em, CenteringMode mode) {
  validate(em);
  const int B = em.batch(), T = em.length(), C = em.labels();
  CenteredEmissions out;
  out.mode = mode;
  out.lengths = em.lengths;
  out.baseline = Tensor({sz(B), sz(C)});
  out.shift = Tensor({sz(B), sz(T)});

  if (mode == CenteringMode::None) {
    out.centered = em.scores;
    return out;
  }

  out.centered = Tensor({sz(B), sz(T), sz(C)});
  for (int b = 0; b < B; ++b) {
    const int L = em.lengths[sz(b)];
    if (mode == CenteringMode::Mean) {
      for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        for (int t = 0; t < L; ++t) sum += em.scores(b, t, c);
        out.baseline(b, c) = sum / L;
      }
      for (int t = 0; t < L; ++t) {
        for (int c = 0; c < C; ++c) out.centered(b, t, c) = em.scores(b, t, c) - out.baseline(b, c);
      }
    } else {
      for (int t = 0; t < L; ++t) {
        double hi = em.scores(b, t, 0);
        for (int c = 1; c < C; ++c) hi = std::max(hi, em.scores(b, t, c));
        out.shift(b, t) = hi;
        for (int c = 0; c < C; ++c) out.centered(b, t, c) = em.scores(b, t, c) - hi;
      }
    }
  }
  return out;
}

CumulativeScores build_cumulative(const CenteredEmissions& in) {
  const Tensor& x = in.centered;
  require(x.rank() == 3, "centered emissions must be (B, T, C)");
  const int B = static_cast<int>(x.dim(0)), T = static_cast<int>(x.dim(1)),
            C = static_cast<int>(x.dim(2));
  check_lengths(in.lengths, B, T);
  CumulativeScores out{Tensor({sz(B), sz(T + 1), sz(C)}), in.lengths};
  for (int b = 0; b < B; ++b) {
    const int L = in.lengths[sz(b)];
    for (int t = 1; t <= T; ++t) {
      for (int c = 0; c < C; ++c) {
        const double step = t <= L ? x(b, t - 1, c) : 0.0;
        out.values(b, t, c) = out.values(b, t - 1, c) + step;
      }
    }
  }
  return out;
}

CumulativeScores fold_scalar_boundaries(CumulativeScores scores,
                                        std::span<const double> pi_start,
                                        std::span<const double> pi_end) {
  const int B = static_cast<int>(scores.values.dim(0));
  const auto C = scores.values.dim(2);
  require(pi_start.empty() || pi_start.size() == C, "pi_start must have C entries");
  require(pi_end.empty() || pi_end.size() == C, "pi_end must have C entries");
  for (int b = 0; b < B; ++b) {
    const int L = scores.lengths[sz(b)];
    for (std::size_t c = 0; c < C; ++c) {
      if (!pi_start.empty()) scores.values(b, 0, c) -= pi_start[c];
      if (!pi_end.empty()) scores.values(b, L, c) += pi_end[c];
    }
  }
  return scores;
}

Potentials make_potentials(const CumulativeScores& scores, const SemiCrfParams& params) {
  params.validate();
  const Tensor& S = scores.values;
  require(S.rank() == 3, "cumulative scores must be (B, T+1, C)");
  Potentials pot;
  pot.B = static_cast<int>(S.dim(0));
  pot.T = static_cast<int>(S.dim(1)) - 1;
  pot.C = static_cast<int>(S.dim(2));
  pot.K = params.max_duration;
  require(pot.T >= 1, "sequence length must be >= 1");
  require(pot.C == params.num_labels, "emission label count does not match parameters");
  check_lengths(scores.lengths, pot.B, pot.T);
  pot.lengths = scores.lengths;
  pot.transition = params.transition;
  pot.duration_bias = params.duration_bias;

  if (!params.has_projections()) {
    const std::span<const double> none;
    pot.cum = fold_scalar_boundaries(scores, params.pi_start ? *params.pi_start : none,
                                     params.pi_end ? *params.pi_end : none)
                  .values;
    return pot;
  }

  pot.cum = S;
  const std::vector<std::size_t> shape{sz(pot.B), sz(pot.T), sz(pot.C)};
  pot.proj_start = params.proj_start ? *params.proj_start : Tensor(shape);
  pot.proj_end = params.proj_end ? *params.proj_end : Tensor(shape);
  require(pot.proj_start->shape() == shape && pot.proj_end->shape() == shape,
          "boundary projections must match the emission shape (B, T, C)");
  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    for (int c = 0; c < pot.C; ++c) {
      if (params.pi_start) (*pot.proj_start)(b, 0, c) += (*params.pi_start)[sz(c)];
      if (params.pi_end) (*pot.proj_end)(b, L - 1, c) += (*params.pi_end)[sz(c)];
    }
  }
  return pot;
}

Potentials make_potentials(const EmissionBatch& emissions, const SemiCrfParams& params,
                           CenteringMode mode) {
  return make_potentials(build_cumulative(center_emissions(emissions, mode)), params);
}

double edge_potential(const Potentials& pot, int b, int t, int k, int c, int c_src) {
  if (b < 0 || b >= pot.B || c < 0 || c >= pot.C || c_src < 0 || c_src >= pot.C) {
    throw ContractViolation("edge_potential: batch or label index out of range");
  }
  if (k < 1 || k > pot.K || k > t || t > pot.lengths[sz(b)]) {
    std::ostringstream os;
    os << "edge_potential: (t=" << t << ", k=" << k << ") outside 1 <= k <= min(K=" << pot.K
       << ", t), t <= L_b=" << pot.lengths[sz(b)];
    throw ContractViolation(os.str());
  }
  return pot.segment_score(b, t, k, c) + pot.transition(c_src, c);
}

double path_score(const Potentials& pot, const Segmentation& seg, int b, int source) {
  validate_segmentation(seg, pot.lengths[sz(b)], pot.K, pot.C);
  double total = 0.0;
  int prev = source;
  for (const Segment& s : seg) {
    total += pot.segment_score(b, s.end(), s.duration, s.label) + pot.transition(prev, s.label);
    prev = s.label;
  }
  return total;
}

double score_segmentation(const Potentials& pot, const Segmentation& seg, int b,
                          SourceReduction reduce) {
  if (b < 0 || b >= pot.B) throw ContractViolation("score_segmentation: batch index out of range");
  std::vector<double> per_source(sz(pot.C));
  for (int c0 = 0; c0 < pot.C; ++c0) per_source[sz(c0)] = path_score(pot, seg, b, c0);
  if (reduce == SourceReduction::Max) {
    return *std::max_element(per_source.begin(), per_source.end());
  }
  return log_sum_exp(per_source);
}

Tensor emission_gradient(const Tensor& grad_cum, const std::vector<int>& lengths,
                         CenteringMode mode) {
  const auto B = grad_cum.dim(0), T = grad_cum.dim(1) - 1, C = grad_cum.dim(2);
  Tensor out({B, T, C});
  for (std::size_t b = 0; b < B; ++b) {
    const auto L = static_cast<std::size_t>(lengths[b]);
    for (std::size_t c = 0; c < C; ++c) {
      // S[t] = sum_{u < t} x[u], so dS/dx[u] picks up every boundary t > u.
      double suffix = 0.0;
      for (std::size_t u = L; u-- > 0;) {
        suffix += grad_cum(b, u + 1, c);
        out(b, u, c) = suffix;
      }
      if (mode == CenteringMode::Mean) {
        double total = 0.0;
        for (std::size_t u = 0; u < L; ++u) total += out(b, u, c);
        const double mean = total / static_cast<double>(L);
        for (std::size_t u = 0; u < L; ++u) out(b, u, c) -= mean;
      }
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> scalar_boundary_gradients(
    const GradientSet& grads, const Potentials& pot) {
  std::vector<double> start(sz(pot.C), 0.0), end(sz(pot.C), 0.0);
  for (int b = 0; b < pot.B; ++b) {
    const int L = pot.lengths[sz(b)];
    for (int c = 0; c < pot.C; ++c) {
      if (pot.has_projections()) {
        start[sz(c)] += (*grads.proj_start)(b, 0, c);
        end[sz(c)] += (*grads.proj_end)(b, L - 1, c);
      } else {
        start[sz(c)] -= grads.cum(b, 0, c);
        end[sz(c)] += grads.cum(b, L, c);
      }
    }
  }
  return {start, end};
}

}  // namespace streamcrf
