#include <gtest/gtest.h>

#include <cmath>

#include "streamcrf/potentials.hpp"
#include "support.hpp"

using namespace streamcrf;
using testing_support::Gen;

namespace {

EmissionBatch batch_of(std::size_t B, std::size_t T, std::size_t C, std::vector<int> lengths) {
  EmissionBatch em;
  em.scores = Tensor({B, T, C});
  em.lengths = std::move(lengths);
  return em;
}

// Three labels over 100 positions, each switching between an active and an
// inactive value: 85 active for label 0, 14 for label 1, 1 for label 2.
EmissionBatch imbalanced_toy() {
  EmissionBatch em = batch_of(1, 100, 3, {100});
  for (int t = 0; t < 100; ++t) {
    em.scores(0, t, 0) = t < 85 ? 4.0 : -1.0;
    em.scores(0, t, 1) = t < 14 ? 5.0 : -0.5;
    em.scores(0, t, 2) = t < 1 ? 8.0 : -0.2;
  }
  return em;
}

}  // namespace

TEST(Centering, BaselineIsPrevalenceWeightedAverage) {
  const auto ce = center_emissions(imbalanced_toy(), CenteringMode::Mean);
  EXPECT_NEAR(ce.baseline(0, 0), 3.25, 1e-12);
  EXPECT_NEAR(ce.baseline(0, 1), 0.27, 1e-12);
  EXPECT_NEAR(ce.baseline(0, 2), -0.118, 1e-12);
}

TEST(Centering, FullLengthSegmentOfDominantLabelLosesItsBaseline) {
  const EmissionBatch em = imbalanced_toy();
  const auto mean = build_cumulative(center_emissions(em, CenteringMode::Mean));
  const auto none = build_cumulative(center_emissions(em, CenteringMode::None));
  const double raw = none.values(0, 100, 0) - none.values(0, 0, 0);
  const double centered = mean.values(0, 100, 0) - mean.values(0, 0, 0);
  EXPECT_NEAR(raw, 325.0, 1e-9);
  EXPECT_NEAR(centered - raw, -325.0, 1e-9);
}

TEST(Centering, ZeroEmissionsStayZero) {
  const auto ce = center_emissions(batch_of(2, 5, 3, {5, 2}), CenteringMode::Mean);
  for (double x : ce.centered.data()) EXPECT_EQ(x, 0.0);
  for (double x : ce.baseline.data()) EXPECT_EQ(x, 0.0);
}

TEST(Centering, ConstantEmissionsCancelUnderMaskedMean) {
  EmissionBatch em = batch_of(1, 9, 2, {7});
  for (double& x : em.scores.data()) x = 5.0;
  em.scores(0, 8, 1) = 1e6;  // padding must not leak into the baseline
  const auto ce = center_emissions(em, CenteringMode::Mean);
  EXPECT_DOUBLE_EQ(ce.baseline(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(ce.baseline(0, 1), 5.0);
  const auto S = build_cumulative(ce);
  double peak = 0.0;
  for (double x : S.values.data()) peak = std::max(peak, std::abs(x));
  EXPECT_EQ(peak, 0.0);
}

TEST(Centering, ModeInvariantsOnRandomBatches) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = random_instance(seed, {3, 17, 4, 5});
    const auto& em = inst.emissions;
    const auto mean = center_emissions(em, CenteringMode::Mean);
    const auto none = center_emissions(em, CenteringMode::None);
    const auto smax = center_emissions(em, CenteringMode::SharedMax);
    for (int b = 0; b < 3; ++b) {
      const int L = em.lengths[static_cast<std::size_t>(b)];
      for (int c = 0; c < 5; ++c) {
        double sum = 0.0;
        for (int t = 0; t < L; ++t) sum += mean.centered(b, t, c);
        EXPECT_NEAR(sum / L, 0.0, 1e-10);
        EXPECT_EQ(none.baseline(b, c), 0.0);
      }
      for (int t = 0; t < L; ++t) {
        double hi = -1e300;
        for (int c = 0; c < 5; ++c) {
          hi = std::max(hi, smax.centered(b, t, c));
          EXPECT_EQ(none.centered(b, t, c), em.scores(b, t, c));
        }
        EXPECT_NEAR(hi, 0.0, 1e-12);
      }
    }
  }
}

TEST(Centering, NonFiniteEmissionIsNamed) {
  EmissionBatch em = batch_of(2, 4, 3, {4, 2});
  em.scores(1, 3, 2) = std::nan("");  // padded, ignored
  EXPECT_NO_THROW(center_emissions(em, CenteringMode::Mean));
  em.scores(1, 1, 2) = INFINITY;
  try {
    center_emissions(em, CenteringMode::Mean);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("b=1, t=1, c=2"), std::string::npos) << e.what();
  }
}

TEST(Cumulative, DirectSummationRows) {
  EmissionBatch em = batch_of(1, 2, 2, {2});
  em.scores(0, 0, 0) = 1;
  em.scores(0, 0, 1) = -1;
  em.scores(0, 1, 0) = 2;
  em.scores(0, 1, 1) = 0;
  const auto S = build_cumulative(center_emissions(em, CenteringMode::None));
  const double expect[3][2] = {{0, 0}, {1, -1}, {3, -1}};
  for (int t = 0; t < 3; ++t) {
    for (int c = 0; c < 2; ++c) EXPECT_EQ(S.values(0, t, c), expect[t][c]);
  }
}

TEST(Cumulative, RunningSumAndFrozenPadding) {
  const auto inst = random_instance(3, {4, 12, 3, 3});
  const auto ce = center_emissions(inst.emissions, CenteringMode::Mean);
  const auto S = build_cumulative(ce);
  for (int b = 0; b < 4; ++b) {
    const int L = inst.emissions.lengths[static_cast<std::size_t>(b)];
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(S.values(b, 0, c), 0.0);
      for (int t = 1; t <= L; ++t) {
        EXPECT_NEAR(S.values(b, t, c) - S.values(b, t - 1, c), ce.centered(b, t - 1, c), 1e-12);
      }
      for (int t = L + 1; t <= 12; ++t) EXPECT_EQ(S.values(b, t, c), S.values(b, L, c));
    }
  }
}

TEST(Folding, ZeroBoundariesLeaveScoresUnchanged) {
  const auto inst = random_instance(5, {2, 6, 2, 3});
  const auto S = build_cumulative(center_emissions(inst.emissions, CenteringMode::None));
  const std::vector<double> zero(3, 0.0);
  EXPECT_EQ(fold_scalar_boundaries(S, zero, zero).values, S.values);
}

TEST(Folding, OnlyTouchingSegmentsChange) {
  const auto inst = random_instance(6, {1, 5, 5, 2});
  const auto S = build_cumulative(center_emissions(inst.emissions, CenteringMode::None));
  const std::vector<double> ps{0.3, -0.7}, pe{1.1, 0.4};
  const auto F = fold_scalar_boundaries(S, ps, pe);
  for (int c = 0; c < 2; ++c) {
    const double whole = S.values(0, 5, c) - S.values(0, 0, c);
    EXPECT_NEAR(F.values(0, 5, c) - F.values(0, 0, c), whole + ps[c] + pe[c], 1e-12);
    EXPECT_EQ(F.values(0, 3, c) - F.values(0, 1, c), S.values(0, 3, c) - S.values(0, 1, c));
  }
}

class EdgeExample : public ::testing::Test {
 protected:
  void SetUp() override {
    em = batch_of(1, 2, 1, {2});
    em.scores(0, 0, 0) = 1.0;
    em.scores(0, 1, 0) = 2.0;
    params = SemiCrfParams::zeros(1, 2);
    params.duration_bias(1, 0) = 0.5;
    params.transition(0, 0) = -0.25;
  }
  EmissionBatch em;
  SemiCrfParams params;
};

TEST_F(EdgeExample, HandSummation) {
  const auto pot = make_potentials(em, params, CenteringMode::None);
  EXPECT_DOUBLE_EQ(edge_potential(pot, 0, 2, 2, 0, 0), 3.25);
}

TEST_F(EdgeExample, ProjectionsAreAdditive) {
  params.proj_start = Tensor({1, 2, 1});
  params.proj_end = Tensor({1, 2, 1});
  (*params.proj_start)(0, 0, 0) = 1.0;
  (*params.proj_end)(0, 1, 0) = 2.0;
  const auto pot = make_potentials(em, params, CenteringMode::None);
  EXPECT_DOUBLE_EQ(edge_potential(pot, 0, 2, 2, 0, 0), 6.25);
}

TEST_F(EdgeExample, LoneSegmentScoreEqualsEdge) {
  const auto pot = make_potentials(em, params, CenteringMode::None);
  EXPECT_DOUBLE_EQ(score_segmentation(pot, {{0, 2, 0}}, 0), 3.25);
}

TEST_F(EdgeExample, OutOfRangeIsContractViolation) {
  const auto pot = make_potentials(em, params, CenteringMode::None);
  EXPECT_THROW(edge_potential(pot, 0, 1, 2, 0, 0), ContractViolation);
  EXPECT_THROW(edge_potential(pot, 0, 2, 3, 0, 0), ContractViolation);
  EXPECT_THROW(edge_potential(pot, 0, 2, 0, 0, 0), ContractViolation);
  EXPECT_THROW(edge_potential(pot, 0, 3, 1, 0, 0), ContractViolation);
}

TEST(Edge, ZeroInstanceIsZeroEverywhere) {
  const auto pot = testing_support::zero_instance(1, 5, 3, 2).potentials(CenteringMode::Mean);
  for (int t = 1; t <= 5; ++t) {
    for (int k = 1; k <= std::min(3, t); ++k) {
      for (int c = 0; c < 2; ++c) {
        for (int cs = 0; cs < 2; ++cs) EXPECT_EQ(edge_potential(pot, 0, t, k, c, cs), 0.0);
      }
    }
  }
}

TEST(Edge, PrefixSumsMatchDirectSummation) {
  RandomInstanceOptions opts;
  opts.projections = true;
  opts.scalar_boundaries = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = random_instance(seed, {3, 11, 4, 3}, opts);
    const auto pot = inst.potentials();
    for (int b = 0; b < 3; ++b) {
      const int L = inst.emissions.lengths[static_cast<std::size_t>(b)];
      for (int t = 1; t <= L; ++t) {
        for (int k = 1; k <= std::min(4, t); ++k) {
          for (int c = 0; c < 3; ++c) {
            for (int cs = 0; cs < 3; ++cs) {
              const double direct =
                  testing_support::direct_segment(inst.emissions, inst.params, b, t - k, k, c) +
                  inst.params.transition(cs, c);
              EXPECT_NEAR(edge_potential(pot, b, t, k, c, cs), direct, 1e-10);
            }
          }
        }
      }
    }
  }
}

TEST(ScoreSegmentation, ZeroParamsGiveSourceCountOnly) {
  const auto pot = testing_support::zero_instance(1, 6, 3, 2).potentials();
  Gen gen(11);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(score_segmentation(pot, gen.segmentation(6, 3, 2), 0), std::log(2.0), 1e-15);
  }
}

TEST(ScoreSegmentation, RejectsMalformedTilings) {
  const auto pot = testing_support::zero_instance(1, 5, 2, 2).potentials();
  EXPECT_THROW(score_segmentation(pot, {}, 0), InputError);
  EXPECT_THROW(score_segmentation(pot, {{1, 2, 0}, {3, 2, 0}}, 0), InputError);
  EXPECT_THROW(score_segmentation(pot, {{0, 3, 0}, {3, 2, 0}}, 0), InputError);
  EXPECT_THROW(score_segmentation(pot, {{0, 2, 0}, {2, 2, 2}}, 0), InputError);
  EXPECT_THROW(score_segmentation(pot, {{0, 2, 0}, {2, 2, 0}}, 0), InputError);
  EXPECT_THROW(score_segmentation(pot, {{0, 2, 0}, {2, 2, 0}, {4, 2, 0}}, 0), InputError);
}

TEST(ScoreSegmentation, NeverExceedsPartition) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto dims = random_dims(seed, {1, 5, 3, 3});
    const auto inst = random_instance(seed, dims);
    const auto pot = inst.potentials();
    const double log_z = testing_support::enumerate(inst.emissions, inst.params, 0).log_z;
    Gen gen(seed);
    for (int i = 0; i < 10; ++i) {
      const auto seg = gen.segmentation(inst.emissions.lengths[0], dims.K, dims.C);
      EXPECT_LE(score_segmentation(pot, seg, 0), log_z + 1e-12);
    }
  }
}

TEST(Properties, SingleLabelContentTelescopes) {
  Gen gen(21);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {2, 20, 6, 3});
    const auto pot = inst.potentials(CenteringMode::Mean);
    for (int b = 0; b < 2; ++b) {
      const int L = pot.lengths[static_cast<std::size_t>(b)];
      for (int c = 0; c < 3; ++c) {
        const auto seg = gen.segmentation(L, 6, 1);
        double sum = 0.0;
        for (const auto& s : seg) sum += pot.cum(b, s.end(), c) - pot.cum(b, s.start, c);
        EXPECT_NEAR(sum, pot.cum(b, L, c), 1e-12);
      }
    }
  }
}

TEST(Properties, SharedMaxPreservesScoreDifferences) {
  Gen gen(22);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {1, 15, 5, 4});
    const auto none = inst.potentials(CenteringMode::None);
    const auto smax = inst.potentials(CenteringMode::SharedMax);
    const auto s1 = gen.segmentation(15, 5, 4);
    const auto s2 = gen.segmentation(15, 5, 4);
    const double d_none = score_segmentation(none, s1, 0) - score_segmentation(none, s2, 0);
    const double d_smax = score_segmentation(smax, s1, 0) - score_segmentation(smax, s2, 0);
    EXPECT_NEAR(d_none, d_smax, 1e-9);
  }
}

TEST(Properties, MeanEqualsNoneMinusBaselineTimesDuration) {
  Gen gen(23);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {2, 15, 5, 4});
    const auto nu = center_emissions(inst.emissions, CenteringMode::Mean).baseline;
    const auto none = inst.potentials(CenteringMode::None);
    const auto mean = inst.potentials(CenteringMode::Mean);
    for (int b = 0; b < 2; ++b) {
      const auto seg = gen.segmentation(inst.emissions.lengths[static_cast<std::size_t>(b)], 5, 4);
      double penalty = 0.0;
      for (const auto& s : seg) penalty += nu(b, s.label) * s.duration;
      EXPECT_NEAR(score_segmentation(mean, seg, b), score_segmentation(none, seg, b) - penalty, 1e-9);
    }
  }
}

TEST(Properties, PathScoreMatchesDirectOracle) {
  RandomInstanceOptions opts;
  opts.projections = true;
  opts.scalar_boundaries = true;
  Gen gen(24);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {2, 9, 4, 3}, opts);
    const auto pot = inst.potentials();
    for (int b = 0; b < 2; ++b) {
      const auto seg = gen.segmentation(inst.emissions.lengths[static_cast<std::size_t>(b)], 4, 3);
      for (int src = 0; src < 3; ++src) {
        EXPECT_NEAR(path_score(pot, seg, b, src),
                    testing_support::direct_path(inst.emissions, inst.params, b, seg, src), 1e-10);
      }
    }
  }
}

TEST(Params, ParseCenteringNames) {
  EXPECT_EQ(parse_centering("mean"), CenteringMode::Mean);
  EXPECT_EQ(parse_centering("none"), CenteringMode::None);
  EXPECT_EQ(parse_centering("shared-max"), CenteringMode::SharedMax);
  EXPECT_THROW(parse_centering("median"), InputError);
}

TEST(Params, NonFiniteParameterRejected) {
  auto p = SemiCrfParams::zeros(2, 3);
  p.transition(1, 0) = std::nan("");
  EXPECT_THROW(p.validate(), InputError);
}
