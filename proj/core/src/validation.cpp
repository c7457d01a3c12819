#include "streamcrf/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "streamcrf/diagnostics.hpp"
#include "streamcrf/fast_paths.hpp"
#include "streamcrf/io.hpp"
#include "streamcrf/reference.hpp"
#include "streamcrf/streaming.hpp"

namespace streamcrf {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const GradientSet& a, const GradientSet& b) {
  double m = std::max({max_abs_diff(a.cum.data(), b.cum.data()),
                       max_abs_diff(a.transition.data(), b.transition.data()),
                       max_abs_diff(a.duration_bias.data(), b.duration_bias.data())});
  if (a.proj_start) {
    m = std::max({m, max_abs_diff(a.proj_start->data(), b.proj_start->data()),
                  max_abs_diff(a.proj_end->data(), b.proj_end->data())});
  }
  return m;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 && bb == 0.0) return 1.0;
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

double total_log_z(const Potentials& pot, const InferenceOptions& opts) {
  double s = 0.0;
  for (double z : log_partition(pot, opts)) s += z;
  return s;
}

TensorCheck check_tensor(const std::string& name, Potentials& pot, Tensor& param,
                         const Tensor& analytic, const GradcheckOptions& o,
                         const InferenceOptions& inf) {
  std::vector<double> numeric(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + o.eps;
    const double up = total_log_z(pot, inf);
    param.data()[i] = saved - o.eps;
    const double down = total_log_z(pot, inf);
    param.data()[i] = saved;
    numeric[i] = (up - down) / (2.0 * o.eps);
  }
  TensorCheck c;
  c.name = name;
  c.count = param.size();
  c.cosine = cosine(analytic.data(), numeric);
  c.max_abs_error = max_abs_diff(analytic.data(), numeric);
  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  c.normalized_max_error = scale > 0.0 ? c.max_abs_error / scale : c.max_abs_error;
  c.pass = c.cosine >= o.min_cosine && c.normalized_max_error < o.max_normalized_error;
  return c;
}

}  // namespace

bool GradcheckReport::pass() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.pass; });
}

const TensorCheck& GradcheckReport::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ContractViolation("no gradient check named '" + name + "'");
}

nlohmann::json GradcheckReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass();
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    j["tensors"].push_back({{"name", t.name},
                            {"count", t.count},
                            {"cosine", t.cosine},
                            {"normalized_max_error", t.normalized_max_error},
                            {"max_abs_error", t.max_abs_error},
                            {"pass", t.pass}});
  }
  return j;
}

GradcheckReport finite_diff_gradcheck(const Potentials& input, const GradcheckOptions& o) {
  const double work = static_cast<double>(input.T) * input.K * input.C * input.C;
  if (work > o.guard) {
    std::ostringstream os;
    os << "gradcheck refused: T*K*C^2 = " << work << " exceeds the guard of " << o.guard;
    throw GuardExceeded(os.str());
  }
  InferenceOptions inf;
  inf.backend = o.backend;
  inf.threads = o.threads;
  Potentials pot = input;
  const GradientSet g = posterior(pot, {}, inf).gradients;
  GradcheckReport r;
  r.tensors.push_back(check_tensor("cum_scores", pot, pot.cum, g.cum, o, inf));
  r.tensors.push_back(check_tensor("transition", pot, pot.transition, g.transition, o, inf));
  r.tensors.push_back(check_tensor("duration_bias", pot, pot.duration_bias, g.duration_bias, o, inf));
  if (pot.proj_start) {
    r.tensors.push_back(check_tensor("proj_start", pot, *pot.proj_start, *g.proj_start, o, inf));
    r.tensors.push_back(check_tensor("proj_end", pot, *pot.proj_end, *g.proj_end, o, inf));
  }
  return r;
}

bool EquivalenceReport::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const EquivalenceRow& r) { return r.pass; });
}

EquivalenceRow EquivalenceReport::worst() const {
  EquivalenceRow w;
  w.trial = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    w.enum_err = std::max(w.enum_err, r.enum_err);
    w.stream_err = std::max(w.stream_err, r.stream_err);
    w.delta_err = std::max(w.delta_err, r.delta_err);
    w.fast_err = std::max(w.fast_err, r.fast_err);
    w.grad_err = std::max(w.grad_err, r.grad_err);
    w.viterbi_match = w.viterbi_match && r.viterbi_match;
    w.clamp_events += r.clamp_events;
    w.pass = w.pass && r.pass;
  }
  return w;
}

nlohmann::json EquivalenceReport::to_json() const {
  const EquivalenceRow w = worst();
  nlohmann::json j;
  j["pass"] = pass();
  j["trials"] = rows.size();
  j["max_enum_err"] = w.enum_err;
  j["max_stream_err"] = w.stream_err;
  j["max_delta_err"] = w.delta_err;
  j["max_fast_err"] = w.fast_err;
  j["max_grad_err"] = w.grad_err;
  j["viterbi_match"] = w.viterbi_match;
  j["failures"] = nlohmann::json::array();
  for (const auto& r : rows) {
    if (r.pass) continue;
    j["failures"].push_back({{"trial", r.trial},
                             {"seed", r.seed},
                             {"dims", {{"B", r.dims.B}, {"T", r.dims.T}, {"K", r.dims.K}, {"C", r.dims.C}}},
                             {"enum_err", r.enum_err},
                             {"stream_err", r.stream_err},
                             {"delta_err", r.delta_err},
                             {"fast_err", r.fast_err},
                             {"grad_err", r.grad_err},
                             {"viterbi_match", r.viterbi_match},
                             {"clamp_events", r.clamp_events}});
  }
  return j;
}

std::string EquivalenceReport::to_csv() const {
  std::ostringstream os;
  os << kCsvHeader << '\n'
     << "trial,seed,B,T,K,C,enum_err,stream_err,delta_err,fast_err,grad_err,viterbi_match,"
        "clamp_events,pass\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << r.seed << ',' << r.dims.B << ',' << r.dims.T << ',' << r.dims.K << ','
       << r.dims.C << ',' << r.enum_err << ',' << r.stream_err << ',' << r.delta_err << ','
       << r.fast_err << ',' << r.grad_err << ',' << r.viterbi_match << ',' << r.clamp_events
       << ',' << r.pass << '\n';
  }
  return os.str();
}

EquivalenceRow replay_trial(std::uint64_t seed, const Dims& dims, const EquivalenceConfig& cfg) {
  const RandomInstance inst = random_instance(seed, dims, cfg.instance);
  const Potentials pot = inst.potentials();
  EquivalenceRow row;
  row.seed = seed;
  row.dims = dims;

  StreamingOptions so;
  so.threads = cfg.threads;
  so.instrument = true;
  DenseMessages dense = dense_forward(pot);
  const ForwardResult fwd = streaming_forward(pot, so);
  for (int b = 0; b < pot.B; ++b) {
    row.stream_err = std::max(row.stream_err, rel_err(fwd.log_z[sz(b)], dense.log_z[sz(b)]));
  }

  std::vector<Decoded> dense_best;
  for (int b = 0; b < pot.B; ++b) dense_best.push_back(dense_viterbi(pot, b));
  const std::vector<Decoded> stream_best = streaming_viterbi(pot, so);
  for (int b = 0; b < pot.B; ++b) {
    const Decoded& d = dense_best[sz(b)];
    const Decoded& s = stream_best[sz(b)];
    row.viterbi_match = row.viterbi_match && d.score == s.score &&
                        d.segmentation == s.segmentation;
  }

  if (cfg.enumerate) {
    for (int b = 0; b < pot.B; ++b) {
      if (pot.lengths[sz(b)] > 12 || pot.K > 4 || pot.C > 4) continue;
      const double z = enumerate_log_partition(pot, b);
      row.enum_err = std::max({row.enum_err, rel_err(dense.log_z[sz(b)], z),
                               rel_err(fwd.log_z[sz(b)], z)});
      // Equal-score paths are common (a single label telescopes), so the
      // enumerated argmax is compared by score only.
      const Decoded e = enumerate_best_path(pot, b);
      const Decoded& s = stream_best[sz(b)];
      row.viterbi_match =
          row.viterbi_match && rel_err(s.score, e.score) <= cfg.logz_tol &&
          rel_err(score_segmentation(pot, s.segmentation, b, SourceReduction::Max), e.score) <=
              cfg.logz_tol;
    }
  }

  if (cfg.delta_sweep) {
    const int T = pot.T;
    const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(T) * pot.K)));
    for (int delta : {1, 3, root, T}) {
      StreamingOptions d = so;
      d.checkpoint_interval = std::clamp(delta, 1, T);
      const ForwardResult f = streaming_forward(pot, d);
      for (int b = 0; b < pot.B; ++b) {
        row.delta_err = std::max(row.delta_err, rel_err(f.log_z[sz(b)], dense.log_z[sz(b)]));
      }
    }
  }

  if (pot.K <= 2 && !pot.has_projections()) {
    const auto fast = pot.K == 1 ? k1_forward(pot) : k2_forward(pot);
    const auto best = pot.K == 1 ? k1_viterbi(pot) : k2_viterbi(pot);
    for (int b = 0; b < pot.B; ++b) {
      row.fast_err = std::max(row.fast_err, rel_err(fast[sz(b)], fwd.log_z[sz(b)]));
      row.viterbi_match = row.viterbi_match && best[sz(b)].score == stream_best[sz(b)].score &&
                          best[sz(b)].segmentation == stream_best[sz(b)].segmentation;
    }
  }

  std::size_t hazards = fwd.stats.ring_hazards;
  if (cfg.gradients) {
    const DensePosterior dp = dense_backward_marginals(pot, dense);
    const BackwardResult sb = streaming_backward(pot, fwd, {}, so);
    row.grad_err = std::max({max_abs_diff(dp.gradients, sb.gradients),
                             max_abs_diff(dp.marginals.position.data(), sb.marginals.position.data()),
                             max_abs_diff(dp.marginals.boundary.data(), sb.marginals.boundary.data())});
    row.clamp_events = sb.stats.intermediate_clamps;
    hazards += sb.stats.ring_hazards;
  }

  row.pass = row.enum_err <= cfg.logz_tol && row.stream_err <= cfg.logz_tol &&
             row.delta_err <= cfg.logz_tol && row.fast_err <= cfg.logz_tol &&
             row.grad_err <= cfg.grad_tol && row.viterbi_match && row.clamp_events == 0 &&
             hazards == 0;
  return row;
}

EquivalenceReport backend_equivalence(const EquivalenceConfig& cfg) {
  EquivalenceReport r;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    EquivalenceRow row = replay_trial(seed, random_dims(seed, cfg.max), cfg);
    row.trial = trial;
    r.rows.push_back(row);
  }
  return r;
}

bool TrainReport::non_increasing(double slack) const {
  for (const auto& c : curves) {
    for (std::size_t e = 1; e < c.losses.size(); ++e) {
      if (c.losses[e] > c.losses[e - 1] + slack) return false;
    }
  }
  return true;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["final_rel_diff"] = final_rel_diff;
  j["curve_cosine"] = curve_cosine;
  for (const auto& c : curves) {
    j["curves"].push_back({{"backend", std::string(to_string(c.backend))},
                           {"losses", c.losses},
                           {"divergence_epoch", c.divergence_epoch}});
  }
  return j;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << kCsvHeader << '\n' << "epoch";
  for (const auto& c : curves) os << ",nll_" << to_string(c.backend);
  os << '\n';
  os.precision(17);
  const std::size_t n = curves.empty() ? 0 : curves.front().losses.size();
  for (std::size_t e = 0; e < n; ++e) {
    os << e;
    for (const auto& c : curves) os << ',' << c.losses[e];
    os << '\n';
  }
  return os.str();
}

TrainReport training_convergence_demo(const TrainConfig& cfg, std::span<const Backend> backends) {
  const SymbolTask task = generate_symbol_task(cfg.B, cfg.T, cfg.C, cfg.K, cfg.fidelity, cfg.seed);
  Rng init(cfg.seed + 1);
  Tensor table0({sz(task.vocab), sz(cfg.C)});
  const double spread = cfg.convex ? 1.0 : 0.1;
  for (double& x : table0.data()) x = init.uniform(-spread, spread);

  TrainReport report;
  const std::vector<double> weights(sz(cfg.B), 1.0 / cfg.B);
  for (Backend backend : backends) {
    InferenceOptions opts;
    opts.backend = backend;
    opts.checkpoint_interval = cfg.checkpoint_interval;
    opts.threads = cfg.threads;
    Tensor table = table0;
    SemiCrfParams params = SemiCrfParams::zeros(cfg.C, cfg.K);
    TrainCurve curve{backend, {}, -1};
    int rising = 0;
    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
      EmissionBatch em{Tensor({sz(cfg.B), sz(cfg.T), sz(cfg.C)}), task.lengths};
      for (int b = 0; b < cfg.B; ++b) {
        for (int t = 0; t < cfg.T; ++t) {
          const auto row = table.slice(task.symbols[sz(b)][sz(t)]);
          std::copy(row.begin(), row.end(), em.scores.slice(b, t).begin());
        }
      }
      const Potentials pot = make_potentials(em, params, CenteringMode::Mean);
      const NllResult res = nll_with_gradients(pot, task.gold, weights, opts);
      double loss = 0.0;
      for (double v : res.values) loss += v / cfg.B;
      if (!curve.losses.empty()) {
        rising = loss > curve.losses.back() ? rising + 1 : 0;
        if (rising >= 5 && curve.divergence_epoch < 0) curve.divergence_epoch = epoch;
      }
      curve.losses.push_back(loss);
      if (epoch == cfg.epochs) break;

      const GradientSet& g = res.gradients;
      for (std::size_t i = 0; i < params.transition.size(); ++i) {
        params.transition.data()[i] -= cfg.lr * g.transition.data()[i];
      }
      for (std::size_t i = 0; i < params.duration_bias.size(); ++i) {
        params.duration_bias.data()[i] -= cfg.lr * g.duration_bias.data()[i];
      }
      if (!cfg.convex) {
        const Tensor ge = emission_gradient(g.cum, task.lengths, CenteringMode::Mean);
        Tensor gw(table.shape());
        for (int b = 0; b < cfg.B; ++b) {
          for (int t = 0; t < cfg.T; ++t) {
            const auto src = ge.slice(b, t);
            auto dst = gw.slice(task.symbols[sz(b)][sz(t)]);
            for (int c = 0; c < cfg.C; ++c) dst[sz(c)] += src[sz(c)];
          }
        }
        for (std::size_t i = 0; i < table.size(); ++i) table.data()[i] -= cfg.lr * gw.data()[i];
      }
    }
    report.curves.push_back(std::move(curve));
  }
  if (report.curves.size() >= 2) {
    const auto& a = report.curves[0].losses;
    const auto& b = report.curves[1].losses;
    report.final_rel_diff = std::abs(a.back() - b.back()) /
                            std::max(std::abs(b.back()), std::numeric_limits<double>::min());
    report.curve_cosine = cosine(a, b);
  }
  return report;
}

}  // namespace streamcrf
