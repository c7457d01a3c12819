#include "streamcrf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void check_gold(const Potentials& pot, const std::vector<Segmentation>& gold) {
  if (gold.size() != sz(pot.B)) throw InputError("need one gold segmentation per sequence");
  for (int b = 0; b < pot.B; ++b) validate_segmentation(gold[sz(b)], pot.lengths[sz(b)], pot.K, pot.C);
}

}  // namespace

MarginalSet position_marginals(const Tensor& joint, const std::vector<int>& lengths) {
  if (joint.rank() != 5 || joint.dim(3) != joint.dim(4)) {
    throw ContractViolation("joint marginals must be (B, T, K, C, C)");
  }
  const int B = static_cast<int>(joint.dim(0)), T = static_cast<int>(joint.dim(1)),
            K = static_cast<int>(joint.dim(2)), C = static_cast<int>(joint.dim(3));
  MarginalAccumulator acc(B, T, C, lengths);
  for (int b = 0; b < B; ++b) {
    for (int t = 1; t <= lengths[sz(b)]; ++t) {
      for (int k = 1; k <= std::min(K, t); ++k) {
        for (int c = 0; c < C; ++c) {
          double mass = 0.0;
          for (double mu : joint.slice(b, t - 1, k - 1, c)) mass += mu;
          acc.add(b, t - k, k, c, mass);
        }
      }
    }
  }
  return acc.finish();
}

std::vector<double> boundary_entropy(const Tensor& boundary, const std::vector<int>& lengths) {
  std::vector<double> out;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    const auto row = boundary.slice(b).first(sz(lengths[b]));
    double total = 0.0;
    for (double p : row) total += std::max(p, 0.0);
    if (!(total > 0.0)) {
      throw InputError("boundary posterior of sequence " + std::to_string(b) +
                       " has no positive mass; entropy is undefined");
    }
    double h = 0.0;
    for (double p : row) {
      const double q = std::max(p, 0.0) / total;
      if (q > 0.0) h -= q * std::log(q);
    }
    out.push_back(h);
  }
  return out;
}

bool ConsistencyReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.pass; });
}

const InvariantCheck& ConsistencyReport::at(const std::string& invariant) const {
  for (const auto& c : checks) {
    if (c.invariant == invariant) return c;
  }
  throw ContractViolation("no invariant named '" + invariant + "'");
}

nlohmann::json ConsistencyReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass();
  j["boundary_min"] = boundary_min;
  j["boundary_max"] = boundary_max;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"invariant", c.invariant},
                           {"tolerance", c.tolerance},
                           {"max_deviation", c.max_deviation},
                           {"pass", c.pass}});
  }
  return j;
}

ConsistencyReport self_consistency_report(const MarginalSet& m, const ConsistencyTolerances& tol) {
  const auto B = m.position.dim(0), T = m.position.dim(1), C = m.position.dim(2);
  double range = 0.0, norm = 0.0, mass = 0.0, pad = 0.0, segs = 0.0;
  double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
  for (std::size_t b = 0; b < B; ++b) {
    const auto L = static_cast<std::size_t>(m.lengths[b]);
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double bp = m.boundary(b, t);
      if (t >= L) {
        pad = std::max(pad, std::abs(bp));
        for (std::size_t c = 0; c < C; ++c) pad = std::max(pad, std::abs(m.position(b, t, c)));
        continue;
      }
      range = std::max({range, -bp, bp - 1.0});
      bmin = std::min(bmin, bp);
      bmax = std::max(bmax, bp);
      double row = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double p = m.position(b, t, c);
        range = std::max({range, -p, p - 1.0});
        row += p;
      }
      norm = std::max(norm, std::abs(row - 1.0));
      total += row;
    }
    mass = std::max(mass, std::abs(total - static_cast<double>(L)) / static_cast<double>(L));
    const double e = m.expected_segments[b];
    segs = std::max({segs, 1.0 - e, e - static_cast<double>(L)});
  }
  ConsistencyReport r;
  r.boundary_min = bmin;
  r.boundary_max = bmax;
  auto add = [&](const char* name, double t, double dev) {
    r.checks.push_back({name, t, dev, dev <= t});
  };
  add("range", tol.range, range);
  add("normalization", tol.normalization, norm);
  add("mass_conservation", tol.mass_relative, mass);
  add("padding", 0.0, pad);
  add("expected_segments", tol.segment_count, std::max(segs, 0.0));
  return r;
}

double nll(const Potentials& pot, const Segmentation& gold, int b, double log_z) {
  return log_z - score_segmentation(pot, gold, b);
}

std::vector<double> nll(const Potentials& pot, const std::vector<Segmentation>& gold,
                        const InferenceOptions& opts) {
  check_gold(pot, gold);
  const std::vector<double> log_z = log_partition(pot, opts);
  std::vector<double> out;
  for (int b = 0; b < pot.B; ++b) out.push_back(nll(pot, gold[sz(b)], b, log_z[sz(b)]));
  return out;
}

void add_gold_statistics(GradientSet& g, const Potentials& pot, const Segmentation& gold, int b,
                         double weight) {
  validate_segmentation(gold, pot.lengths[sz(b)], pot.K, pot.C);
  const int first = gold.front().label;
  std::vector<double> src(sz(pot.C));
  for (int c0 = 0; c0 < pot.C; ++c0) src[sz(c0)] = pot.transition(c0, first);
  const double lse = log_sum_exp(src);
  for (int c0 = 0; c0 < pot.C; ++c0) {
    g.transition(c0, first) += weight * std::exp(src[sz(c0)] - lse);
  }
  int prev = -1;
  for (const Segment& s : gold) {
    if (prev >= 0) g.transition(prev, s.label) += weight;
    g.cum(b, s.end(), s.label) += weight;
    g.cum(b, s.start, s.label) -= weight;
    g.duration_bias(s.duration - 1, s.label) += weight;
    if (g.proj_start) {
      (*g.proj_start)(b, s.start, s.label) += weight;
      (*g.proj_end)(b, s.end() - 1, s.label) += weight;
    }
    prev = s.label;
  }
}

NllResult nll_with_gradients(const Potentials& pot, const std::vector<Segmentation>& gold,
                             std::span<const double> weights, const InferenceOptions& opts) {
  check_gold(pot, gold);
  if (!weights.empty() && weights.size() != sz(pot.B)) {
    throw ContractViolation("weights must have one entry per sequence");
  }
  Posterior post = posterior(pot, weights, opts);
  NllResult out;
  out.gradients = std::move(post.gradients);
  for (int b = 0; b < pot.B; ++b) {
    const double w = weights.empty() ? 1.0 : weights[sz(b)];
    out.values.push_back(nll(pot, gold[sz(b)], b, post.log_z[sz(b)]));
    add_gold_statistics(out.gradients, pot, gold[sz(b)], b, -w);
  }
  return out;
}

}  // namespace streamcrf
