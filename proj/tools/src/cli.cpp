#include "streamcrf_cli/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "bench.hpp"
#include "streamcrf/banded.hpp"
#include "streamcrf/datagen.hpp"
#include "streamcrf/diagnostics.hpp"
#include "streamcrf/inference.hpp"
#include "streamcrf/io.hpp"
#include "streamcrf/validation.hpp"

namespace streamcrf::cli {

namespace {

using nlohmann::json;

enum class Format { Csv, Json };

struct Common {
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;
  int threads = 1;

  [[nodiscard]] Format fmt() const { return format == "csv" ? Format::Csv : Format::Json; }
};

void add_common(CLI::App* app, Common& c, const std::string& default_format) {
  c.format = default_format;
  app->add_option("--out", c.out, "Write the report here instead of stdout");
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker cap for batch parallelism")->check(CLI::PositiveNumber);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

std::string failure_json(const std::string& kind, const std::string& message) {
  return json{{"status", "error"}, {"error", kind}, {"message", message}}.dump();
}

std::vector<Backend> parse_backends(const std::vector<std::string>& names) {
  std::vector<Backend> out;
  for (const auto& n : names) out.push_back(parse_backend(n));
  return out;
}

Dims parse_dims(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stoi(cell));
  if (v.size() != 4) throw InputError("--dims expects B,T,K,C");
  return {v[0], v[1], v[2], v[3]};
}

// ---- subcommands ----------------------------------------------------------

struct BenchArgs {
  Common common;
  std::vector<int> T{1000}, K{8}, C{5};
  int B = 1;
  std::vector<std::string> backends{"streaming", "dense"};
  int repeats = 3;
  int delta = 0;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  BenchConfig cfg;
  cfg.T = a.T;
  cfg.K = a.K;
  cfg.C = a.C;
  cfg.B = a.B;
  cfg.backends = parse_backends(a.backends);
  cfg.repeats = a.repeats;
  if (a.delta > 0) cfg.delta = a.delta;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  const auto rows = run_bench(cfg);
  emit(a.common.fmt() == Format::Csv ? bench_csv(rows) : bench_json(rows).dump(2), a.common.out, out);
  return 0;
}

struct GradcheckArgs {
  Common common;
  int B = 1, T = 100, K = 25, C = 16;
  double eps = 1e-3;
  std::string backend = "auto";
  bool projections = false;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  RandomInstanceOptions ro;
  ro.projections = a.projections;
  const Potentials pot =
      random_instance(a.common.seed, {a.B, a.T, a.K, a.C}, ro).potentials(CenteringMode::Mean);
  GradcheckOptions o;
  o.eps = a.eps;
  o.backend = parse_backend(a.backend);
  o.threads = a.common.threads;
  const GradcheckReport r = finite_diff_gradcheck(pot, o);
  if (a.common.fmt() == Format::Csv) {
    std::ostringstream os;
    os << kCsvHeader << "\nname,count,cosine,normalized_max_error,max_abs_error,pass\n";
    for (const auto& t : r.tensors) {
      os << t.name << ',' << t.count << ',' << t.cosine << ',' << t.normalized_max_error << ','
         << t.max_abs_error << ',' << t.pass << '\n';
    }
    emit(os.str(), a.common.out, out);
  } else {
    emit(r.to_json().dump(2), a.common.out, out);
  }
  return r.pass() ? 0 : 1;
}

struct OracleArgs {
  Common common;
  int trials = 500;
  int B = 1, T = 6, K = 3, C = 3;
  std::string dims;
  bool no_enumerate = false;
  bool no_gradients = false;
  bool projections = false;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
  EquivalenceConfig cfg;
  cfg.trials = a.trials;
  cfg.max = {a.B, a.T, a.K, a.C};
  cfg.seed = a.common.seed;
  cfg.enumerate = !a.no_enumerate;
  cfg.gradients = !a.no_gradients;
  cfg.instance.projections = a.projections;
  cfg.instance.scalar_boundaries = a.projections;
  cfg.threads = a.common.threads;
  EquivalenceReport r;
  if (!a.dims.empty()) {
    r.rows.push_back(replay_trial(a.common.seed, parse_dims(a.dims), cfg));
  } else {
    r = backend_equivalence(cfg);
  }
  emit(a.common.fmt() == Format::Csv ? r.to_csv() : r.to_json().dump(2), a.common.out, out);
  return r.pass() ? 0 : 1;
}

struct TrainArgs {
  Common common;
  int B = 4, T = 200, K = 12, C = 8;
  int epochs = 100;
  double lr = 0.05;
  std::vector<std::string> backends{"dense", "streaming"};
  bool convex = false;
  int delta = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  cfg.B = a.B;
  cfg.T = a.T;
  cfg.K = a.K;
  cfg.C = a.C;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.seed = a.common.seed;
  cfg.convex = a.convex;
  cfg.threads = a.common.threads;
  if (a.delta > 0) cfg.checkpoint_interval = a.delta;
  const auto backends = parse_backends(a.backends);
  const TrainReport r = training_convergence_demo(cfg, backends);
  emit(a.common.fmt() == Format::Csv ? r.to_csv() : r.to_json().dump(2), a.common.out, out);
  bool ok = r.curves.size() < 2 || (r.final_rel_diff < 1e-9 && r.curve_cosine >= 0.999999);
  for (const auto& c : r.curves) ok = ok && c.divergence_epoch < 0;
  if (a.convex) ok = ok && r.non_increasing();
  return ok ? 0 : 1;
}

struct AblateArgs {
  Common common;
  int B = 1, T = 2000, K = 50;
  std::vector<double> proportions{0.75, 0.15, 0.10};
  double gain = 0.3;
  double noise = 0.5;
  double penalty = 1.0;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  AblationConfig cfg;
  cfg.data.B = a.B;
  cfg.data.T = a.T;
  cfg.data.K = a.K;
  cfg.data.proportions = a.proportions;
  cfg.data.active_gain = a.gain;
  cfg.data.noise = a.noise;
  cfg.segment_penalty = a.penalty;
  const CenteringMode modes[] = {CenteringMode::None, CenteringMode::Mean, CenteringMode::SharedMax};
  const AblationReport r = centering_ablation(cfg, modes, a.common.seed, a.common.threads);
  emit(a.common.fmt() == Format::Csv ? r.to_csv() : r.to_json().dump(2), a.common.out, out);
  // The baseline must follow label prevalence.
  std::vector<std::size_t> by_p(a.proportions.size()), by_nu(a.proportions.size());
  std::iota(by_p.begin(), by_p.end(), 0);
  std::iota(by_nu.begin(), by_nu.end(), 0);
  std::stable_sort(by_p.begin(), by_p.end(), [&](auto x, auto y) { return a.proportions[x] > a.proportions[y]; });
  std::stable_sort(by_nu.begin(), by_nu.end(), [&](auto x, auto y) { return r.nu[x] > r.nu[y]; });
  return by_p.front() == by_nu.front() ? 0 : 1;
}

struct BandwidthArgs {
  Common common;
  int K = 6, C = 3;
  std::vector<int> spans;
  int lemma_T = 0;
  int lemma_m = 12;
};

int cmd_bandwidth(const BandwidthArgs& a, std::ostream& out) {
  std::vector<int> spans = a.spans;
  if (spans.empty()) {
    spans.resize(static_cast<std::size_t>(2 * a.K));
    std::iota(spans.begin(), spans.end(), 1);
  }
  const auto rows = rcm_bandwidth_report(spans, a.K, a.C);
  bool ok = true;
  for (const auto& r : rows) {
    if (r.S <= 2 * a.K && r.bw < clique_lower_bound(r.S, r.C)) ok = false;
  }
  json lemma = json::array();
  for (int T = 1; T <= a.lemma_T; ++T) {
    for (int m = 1; m <= std::min(a.lemma_m, T); ++m) {
      const int bw = boolean_power_bandwidth(T, a.K, m);
      const int expect = std::min(T, m * a.K);
      if (bw != expect) {
        ok = false;
        lemma.push_back({{"T", T}, {"K", a.K}, {"m", m}, {"bw", bw}, {"expected", expect}});
      }
    }
  }
  if (a.common.fmt() == Format::Csv) {
    emit(bandwidth_report_csv(rows), a.common.out, out);
  } else {
    json j{{"pass", ok}, {"lemma_mismatches", lemma}, {"rows", json::array()}};
    for (const auto& r : rows) {
      j["rows"].push_back({{"S", r.S}, {"K", r.K}, {"C", r.C}, {"n", r.n}, {"ordering", r.ordering},
                           {"bw", r.bw}, {"ratio", r.ratio}, {"span_class", r.span_class},
                           {"clique_lower_bound", clique_lower_bound(r.S, r.C)}});
    }
    emit(j.dump(2), a.common.out, out);
  }
  return ok ? 0 : 1;
}

struct DecodeArgs {
  Common common;
  std::string params;
  std::string emissions;
  std::string marginals;
  std::string centering = "mean";
  std::string backend = "auto";
  int delta = 0;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  const SemiCrfParams params = load_params(a.params);
  const EmissionBatch em = load_emissions(a.emissions);
  const Potentials pot = make_potentials(em, params, parse_centering(a.centering));
  InferenceOptions opts;
  opts.backend = parse_backend(a.backend);
  opts.threads = a.common.threads;
  if (a.delta > 0) opts.checkpoint_interval = a.delta;
  const std::vector<Decoded> best = decode(pot, opts);
  if (a.common.fmt() == Format::Csv) {
    std::vector<Segmentation> segs;
    for (const auto& d : best) segs.push_back(d.segmentation);
    std::ostringstream os;
    write_segmentations_csv(os, segs);
    emit(os.str(), a.common.out, out);
  } else {
    emit(decoded_to_json(best).dump(2), a.common.out, out);
  }
  if (!a.marginals.empty()) {
    const Posterior post = posterior(pot, {}, opts);
    std::ostringstream os;
    if (a.marginals.size() >= 5 && a.marginals.substr(a.marginals.size() - 5) == ".json") {
      json j = marginals_to_json(post.marginals);
      j["log_z"] = post.log_z;
      os << j.dump(2);
    } else {
      write_marginals_csv(os, post.marginals);
    }
    emit(os.str(), a.marginals, out);
  }
  return 0;
}

struct SelfcheckArgs {
  Common common;
  int B = 4, T = 2000, K = 50, C = 32;
  std::string backend = "auto";
  double tolerance = 1e-5;
  int delta = 0;
};

int cmd_selfcheck(const SelfcheckArgs& a, std::ostream& out) {
  const Potentials pot =
      random_instance(a.common.seed, {a.B, a.T, a.K, a.C}).potentials(CenteringMode::Mean);
  InferenceOptions opts;
  opts.backend = parse_backend(a.backend);
  opts.threads = a.common.threads;
  if (a.delta > 0) opts.checkpoint_interval = a.delta;
  const Posterior post = posterior(pot, {}, opts);
  ConsistencyTolerances tol;
  tol.normalization = a.tolerance;
  const ConsistencyReport r = self_consistency_report(post.marginals, tol);
  if (a.common.fmt() == Format::Csv) {
    std::ostringstream os;
    os << kCsvHeader << "\ninvariant,tolerance,max_deviation,pass\n";
    for (const auto& c : r.checks) {
      os << c.invariant << ',' << c.tolerance << ',' << c.max_deviation << ',' << c.pass << '\n';
    }
    emit(os.str(), a.common.out, out);
  } else {
    json j = r.to_json();
    j["intermediate_clamps"] = post.stats.intermediate_clamps;
    emit(j.dump(2), a.common.out, out);
  }
  return r.pass() && post.stats.intermediate_clamps == 0 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-Markov CRF inference: benchmarks, validation and decoding", "streamcrf"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time forward/backward and measure DP working memory");
  add_common(b, bench.common, "csv");
  b->add_option("--T", bench.T, "Sequence lengths")->delimiter(',');
  b->add_option("--K", bench.K, "Max durations")->delimiter(',');
  b->add_option("--C", bench.C, "Label counts")->delimiter(',');
  b->add_option("--B", bench.B, "Batch size");
  b->add_option("--backend", bench.backends, "dense, streaming or auto")->delimiter(',');
  b->add_option("--repeats", bench.repeats, "Timed runs after one warmup");
  b->add_option("--delta", bench.delta, "Checkpoint interval override");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Central finite differences against the backward pass");
  add_common(g, grad.common, "json");
  g->add_option("--B", grad.B, "Batch size");
  g->add_option("--T", grad.T, "Sequence length");
  g->add_option("--K", grad.K, "Maximum duration");
  g->add_option("--C", grad.C, "Label count");
  g->add_option("--eps", grad.eps, "Perturbation size");
  g->add_option("--backend", grad.backend, "auto, dense or streaming");
  g->add_flag("--projections", grad.projections, "Include boundary projections");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Cross-backend equivalence on random instances");
  add_common(o, oracle.common, "json");
  o->add_option("--trials", oracle.trials, "Random instances");
  o->add_option("--B", oracle.B, "Maximum batch size");
  o->add_option("--T", oracle.T, "Maximum length");
  o->add_option("--K", oracle.K, "Maximum duration");
  o->add_option("--C", oracle.C, "Maximum label count");
  o->add_option("--dims", oracle.dims, "Replay one instance: B,T,K,C with --seed");
  o->add_flag("--no-enumerate", oracle.no_enumerate);
  o->add_flag("--no-gradients", oracle.no_gradients);
  o->add_flag("--projections", oracle.projections, "Add projections and scalar boundaries");

  TrainArgs train;
  auto* t = app.add_subcommand("train-demo", "Gradient descent on a synthetic task per backend");
  add_common(t, train.common, "json");
  t->add_option("--B", train.B, "Batch size");
  t->add_option("--T", train.T, "Sequence length");
  t->add_option("--K", train.K, "Maximum duration");
  t->add_option("--C", train.C, "Label count");
  t->add_option("--epochs", train.epochs, "Gradient steps");
  t->add_option("--lr", train.lr, "Learning rate");
  t->add_option("--backend", train.backends, "Backends to compare")->delimiter(',');
  t->add_option("--delta", train.delta, "Checkpoint interval override");
  t->add_flag("--convex", train.convex, "Freeze emissions; train transitions and durations");

  AblateArgs ablate;
  auto* a = app.add_subcommand("ablate-centering", "Decoded segment counts per centering mode");
  add_common(a, ablate.common, "json");
  a->add_option("--B", ablate.B, "Batch size");
  a->add_option("--T", ablate.T, "Sequence length");
  a->add_option("--K", ablate.K, "Maximum duration");
  a->add_option("--proportions", ablate.proportions, "Label mass fractions")->delimiter(',');
  a->add_option("--gain", ablate.gain, "Emission at the gold label");
  a->add_option("--noise", ablate.noise, "Uniform noise half-width");
  a->add_option("--penalty", ablate.penalty, "Per-segment cost in the decoder");

  BandwidthArgs band;
  auto* w = app.add_subcommand("bandwidth", "Bandwidth of duration-compatibility matrices");
  add_common(w, band.common, "csv");
  w->add_option("--K", band.K, "Maximum duration");
  w->add_option("--C", band.C, "Label count");
  w->add_option("--S", band.spans, "Spans (default 1..2K)")->delimiter(',');
  w->add_option("--T", band.lemma_T, "Also check bw(B^m) = min(T, mK) for lengths up to T");
  w->add_option("--m", band.lemma_m, "Largest power for the check");

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Viterbi segmentation and optional marginals");
  add_common(d, dec.common, "json");
  d->add_option("--params", dec.params, "Parameter JSON")->required();
  d->add_option("--emissions", dec.emissions, "Emission CSV or JSON")->required();
  d->add_option("--marginals", dec.marginals, "Write marginals (.json or CSV)");
  d->add_option("--centering", dec.centering, "Emission centering")->check(CLI::IsMember({"mean", "none", "shared-max"}));
  d->add_option("--backend", dec.backend, "auto, dense or streaming");
  d->add_option("--delta", dec.delta, "Checkpoint interval override");

  SelfcheckArgs self;
  auto* s = app.add_subcommand("selfcheck", "Marginal invariants on a random instance");
  add_common(s, self.common, "json");
  s->add_option("--B", self.B, "Batch size");
  s->add_option("--T", self.T, "Sequence length");
  s->add_option("--K", self.K, "Maximum duration");
  s->add_option("--C", self.C, "Label count");
  s->add_option("--backend", self.backend, "auto, dense or streaming");
  s->add_option("--tolerance", self.tolerance, "Normalization tolerance");
  s->add_option("--delta", self.delta, "Checkpoint interval override");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*b) return cmd_bench(bench, out);
    if (*g) return cmd_gradcheck(grad, out);
    if (*o) return cmd_oracle(oracle, out);
    if (*t) return cmd_train(train, out);
    if (*a) return cmd_ablate(ablate, out);
    if (*w) return cmd_bandwidth(band, out);
    if (*d) return cmd_decode(dec, out);
    if (*s) return cmd_selfcheck(self, out);
  } catch (const InputError& e) {
    out << failure_json("input", e.what()) << '\n';
    return 2;
  } catch (const GuardExceeded& e) {
    out << failure_json("guard", e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    out << failure_json("internal", e.what()) << '\n';
    return 3;
  }
  return 2;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace streamcrf::cli
