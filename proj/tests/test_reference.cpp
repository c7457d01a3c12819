#include <gtest/gtest.h>

#include <cmath>

#include "streamcrf/reference.hpp"
#include "support.hpp"

using namespace streamcrf;
using testing_support::rel_err;
using testing_support::zero_instance;

namespace {

double dense_log_z(const Potentials& pot, int b) { return dense_forward(pot).log_z[static_cast<std::size_t>(b)]; }

}  // namespace

TEST(Enumerate, CountingExamples) {
  const auto one = zero_instance(1, 1, 1, 1);
  EXPECT_EQ(enumerate_log_partition(one.potentials(), 0), 0.0);
  EXPECT_EQ(testing_support::enumerate(one.emissions, one.params, 0).log_z, 0.0);

  const auto two = zero_instance(1, 1, 1, 2);
  EXPECT_NEAR(enumerate_log_partition(two.potentials(), 0), std::log(4.0), 1e-15);

  const auto four = zero_instance(1, 4, 2, 2);
  const auto oracle = testing_support::enumerate(four.emissions, four.params, 0);
  EXPECT_EQ(oracle.paths, 44U);
  EXPECT_NEAR(oracle.log_z, std::log(88.0), 1e-14);
  EXPECT_NEAR(enumerate_log_partition(four.potentials(), 0), std::log(88.0), 1e-14);
}

TEST(Enumerate, GuardRefusesLargeInstances) {
  EXPECT_THROW(enumerate_log_partition(zero_instance(1, 13, 2, 2).potentials(), 0), GuardExceeded);
  EXPECT_THROW(enumerate_log_partition(zero_instance(1, 4, 5, 2).potentials(), 0), GuardExceeded);
  EXPECT_THROW(enumerate_log_partition(zero_instance(1, 4, 2, 5).potentials(), 0), GuardExceeded);
}

TEST(Enumerate, LibraryAgreesWithTestOracle) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto inst = random_instance(seed, random_dims(seed, {2, 6, 3, 3}));
    const auto pot = inst.potentials();
    for (int b = 0; b < pot.B; ++b) {
      const auto oracle = testing_support::enumerate(inst.emissions, inst.params, b);
      EXPECT_LE(rel_err(enumerate_log_partition(pot, b), oracle.log_z), 1e-12);
      EXPECT_NEAR(enumerate_best_path(pot, b).score, oracle.best, 1e-12);
    }
  }
}

TEST(DenseForward, MatchesEnumerationOnRandomInstances) {
  RandomInstanceOptions with_boundaries;
  with_boundaries.projections = true;
  with_boundaries.scalar_boundaries = true;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto opts = seed % 2 == 0 ? with_boundaries : RandomInstanceOptions{};
    const auto inst = random_instance(seed, random_dims(seed, {2, 6, 3, 3}), opts);
    const auto msgs = dense_forward(inst.potentials());
    for (int b = 0; b < inst.dims.B; ++b) {
      const double expect = testing_support::enumerate(inst.emissions, inst.params, b).log_z;
      EXPECT_LE(rel_err(msgs.log_z[static_cast<std::size_t>(b)], expect), 1e-10) << "seed " << seed;
    }
  }
}

TEST(DenseForward, UniformTwoLabels) {
  EXPECT_NEAR(dense_log_z(zero_instance(1, 1, 1, 2).potentials(), 0), std::log(4.0), 1e-15);
}

TEST(DenseForward, MonotoneInDurationBias) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = random_instance(seed, {1, 8, 3, 3});
    auto pot = inst.potentials();
    const double base = dense_log_z(pot, 0);
    pot.duration_bias(static_cast<int>(seed % 3), static_cast<int>(seed % 2)) += 0.3;
    EXPECT_GE(dense_log_z(pot, 0), base);
  }
}

TEST(DenseMessages, BoundaryValuesAndFlowConservation) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {3, 20, 5, 4});
    const auto pot = inst.potentials(CenteringMode::Mean);
    auto msgs = dense_forward(pot);
    dense_backward_marginals(pot, msgs);
    for (int b = 0; b < 3; ++b) {
      const int L = pot.lengths[static_cast<std::size_t>(b)];
      for (int c = 0; c < 4; ++c) {
        EXPECT_EQ(msgs.alpha(b, 0, c), 0.0);
        EXPECT_EQ(msgs.beta(b, L, c), 0.0);
      }
      // Every path passes through both ends; interior positions can be skipped.
      for (int t = 0; t <= L; ++t) {
        std::vector<double> flow(4);
        for (int c = 0; c < 4; ++c) flow[static_cast<std::size_t>(c)] = msgs.alpha(b, t, c) + msgs.beta(b, t, c);
        const double z = msgs.log_z[static_cast<std::size_t>(b)];
        if (t == 0 || t == L) {
          EXPECT_NEAR(log_sum_exp(flow), z, 1e-8);
        } else {
          EXPECT_LE(log_sum_exp(flow), z + 1e-8);
        }
      }
    }
  }
}

TEST(DenseMarginals, SinglePathHasUnitMass) {
  const auto pot = zero_instance(1, 1, 1, 1).potentials();
  auto msgs = dense_forward(pot);
  const auto post = dense_backward_marginals(pot, msgs);
  EXPECT_EQ(post.joint(0, 0, 0, 0, 0), 1.0);
  EXPECT_EQ(post.gradients.duration_bias(0, 0), 1.0);
  EXPECT_EQ(post.gradients.transition(0, 0), 1.0);
}

TEST(DenseMarginals, RangeAndExpectedSegmentCount) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = random_instance(seed, {2, 25, 6, 3});
    const auto pot = inst.potentials(CenteringMode::Mean);
    auto msgs = dense_forward(pot);
    const auto post = dense_backward_marginals(pot, msgs);
    for (double m : post.joint.data()) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0 + 1e-12);
    }
    for (int b = 0; b < 2; ++b) {
      const int L = pot.lengths[static_cast<std::size_t>(b)];
      double total = 0.0;
      for (int t = 0; t < L; ++t) {
        for (int k = 0; k < 6; ++k) {
          for (int c = 0; c < 3; ++c) {
            for (int cs = 0; cs < 3; ++cs) total += post.joint(b, t, k, c, cs);
          }
        }
      }
      EXPECT_NEAR(total, post.marginals.expected_segments[static_cast<std::size_t>(b)], 1e-9);
      EXPECT_GE(total, 1.0 - 1e-9);
      EXPECT_LE(total, L + 1e-9);
    }
  }
}

TEST(DenseMarginals, GradientMatchesCentralDifferences) {
  const double eps = 1e-4;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = random_instance(seed, {1, 7, 3, 3});
    auto pot = inst.potentials();
    auto msgs = dense_forward(pot);
    const auto grads = dense_backward_marginals(pot, msgs).gradients;
    auto check = [&](Tensor& param, const Tensor& analytic) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + eps;
        const double up = dense_log_z(pot, 0);
        param.data()[i] = keep - eps;
        const double down = dense_log_z(pot, 0);
        param.data()[i] = keep;
        EXPECT_NEAR((up - down) / (2 * eps), analytic.data()[i], 1e-7);
      }
    };
    check(pot.cum, grads.cum);
    check(pot.transition, grads.transition);
    check(pot.duration_bias, grads.duration_bias);
  }
}

TEST(DenseMarginals, GradientSumRules) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = random_instance(seed, {3, 30, 6, 4});
    const auto pot = inst.potentials(CenteringMode::Mean);
    const std::vector<double> upstream{1.0, 0.0, 0.0};
    auto msgs = dense_forward(pot);
    const auto post = dense_backward_marginals(pot, msgs, upstream);
    double sum_s = 0.0, sum_b = 0.0;
    for (double g : post.gradients.cum.slice(0)) sum_s += g;
    for (double g : post.gradients.duration_bias.data()) sum_b += g;
    EXPECT_NEAR(sum_s, 0.0, 1e-6);
    EXPECT_NEAR(sum_b, post.marginals.expected_segments[0], 1e-6);
  }
}

TEST(DenseViterbi, ZeroParamsTieBreak) {
  const auto pot = zero_instance(1, 5, 3, 2).potentials();
  const auto best = dense_viterbi(pot, 0);
  EXPECT_EQ(best.score, 0.0);
  const Segmentation expect{{0, 2, 0}, {2, 3, 0}};
  EXPECT_EQ(best.segmentation, expect);
}

TEST(DenseViterbi, RecoversConstructedBoundary) {
  auto inst = zero_instance(1, 5, 5, 2);
  for (int t = 0; t < 5; ++t) {
    inst.emissions.scores(0, t, 1) = t < 3 ? 2.0 : -2.0;
    inst.emissions.scores(0, t, 0) = t < 3 ? -2.0 : 2.0;
  }
  inst.params.transition(0, 0) = -1.0;
  inst.params.transition(1, 1) = -1.0;
  const auto pot = inst.potentials();
  const auto best = dense_viterbi(pot, 0);
  const Segmentation expect{{0, 3, 1}, {3, 2, 0}};
  EXPECT_EQ(best.segmentation, expect);
  EXPECT_NEAR(best.score, testing_support::enumerate(inst.emissions, inst.params, 0).best, 1e-12);
}

TEST(DenseViterbi, ScoreConsistency) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto inst = random_instance(seed, random_dims(seed, {2, 6, 3, 3}));
    const auto pot = inst.potentials();
    const auto msgs = dense_forward(pot);
    for (int b = 0; b < pot.B; ++b) {
      const auto best = dense_viterbi(pot, b);
      const auto oracle = testing_support::enumerate(inst.emissions, inst.params, b);
      EXPECT_NEAR(best.score, oracle.best, 1e-12);
      EXPECT_NEAR(best.score, score_segmentation(pot, best.segmentation, b, SourceReduction::Max), 1e-12);
      EXPECT_LE(best.score, msgs.log_z[static_cast<std::size_t>(b)]);
    }
  }
}

TEST(DenseViterbi, SharedMaxKeepsArgmax) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = random_instance(seed, {1, 30, 6, 4});
    const auto none = inst.potentials(CenteringMode::None);
    const auto smax = inst.potentials(CenteringMode::SharedMax);
    const auto a = dense_viterbi(none, 0);
    const auto b = dense_viterbi(smax, 0);
    EXPECT_EQ(a.segmentation, b.segmentation);
    double shift = 0.0;
    const auto ce = center_emissions(inst.emissions, CenteringMode::SharedMax);
    for (int t = 0; t < 30; ++t) shift += ce.shift(0, t);
    EXPECT_NEAR(a.score - shift, b.score, 1e-9);
  }
}

TEST(DenseGuard, RefusesAndPointsToStreaming) {
  const auto pot = zero_instance(1, 200, 20, 8).potentials();
  DenseOptions opts;
  opts.guard_bytes = 1 << 20;
  EXPECT_GT(dense_required_bytes(1, 200, 20, 8, false), opts.guard_bytes);
  try {
    dense_forward(pot, opts);
    FAIL() << "expected GuardExceeded";
  } catch (const GuardExceeded& e) {
    EXPECT_NE(std::string(e.what()).find("streaming"), std::string::npos) << e.what();
  }
}
