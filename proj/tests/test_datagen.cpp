#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "streamcrf/datagen.hpp"
#include "streamcrf/io.hpp"
#include "support.hpp"

using namespace streamcrf;

TEST(Rng, DeterministicAndInRange) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const int k = a.uniform_int(-3, 4);
    EXPECT_EQ(k, b.uniform_int(-3, 4));
    EXPECT_GE(k, -3);
    EXPECT_LE(k, 4);
  }
}

TEST(Rng, GeometricMeanAndCap) {
  Rng rng(17);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const int d = rng.geometric(5.0, 1000);
    ASSERT_GE(d, 1);
    sum += d;
  }
  EXPECT_NEAR(sum / n, 5.0, 0.05);
  for (int i = 0; i < 1000; ++i) {
    const int d = rng.geometric(20.0, 7);
    EXPECT_GE(d, 1);
    EXPECT_LE(d, 7);
  }
}

TEST(RandomInstance, ReproducibleAndWithinDocumentedRanges) {
  RandomInstanceOptions opts;
  opts.projections = true;
  opts.scalar_boundaries = true;
  const auto a = random_instance(99, {4, 30, 5, 3}, opts);
  const auto b = random_instance(99, {4, 30, 5, 3}, opts);
  EXPECT_EQ(a.emissions.scores, b.emissions.scores);
  EXPECT_EQ(a.emissions.lengths, b.emissions.lengths);
  EXPECT_EQ(a.params.transition, b.params.transition);
  EXPECT_EQ(*a.params.proj_end, *b.params.proj_end);
  EXPECT_EQ(a.emissions.lengths[0], 30);
  for (double x : a.emissions.scores.data()) EXPECT_LE(std::abs(x), 2.0);
  for (double x : a.params.transition.data()) EXPECT_LE(std::abs(x), 1.0);
  for (double x : a.params.duration_bias.data()) EXPECT_LE(std::abs(x), 0.5);
  for (double x : *a.params.pi_start) EXPECT_LE(std::abs(x), 0.5);
  const auto c = random_instance(100, {4, 30, 5, 3}, opts);
  EXPECT_NE(a.emissions.scores, c.emissions.scores);
}

TEST(RandomDims, StayWithinBounds) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto d = random_dims(seed, {2, 6, 3, 3});
    EXPECT_TRUE(d.B >= 1 && d.B <= 2 && d.T >= 1 && d.T <= 6);
    EXPECT_TRUE(d.K >= 1 && d.K <= 3 && d.C >= 1 && d.C <= 3);
  }
}

TEST(Imbalanced, LabelMassMatchesTargets) {
  ImbalancedConfig cfg;
  cfg.B = 3;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = generate_imbalanced(cfg, seed);
    for (const auto& gold : data.gold) {
      EXPECT_NO_THROW(validate_segmentation(gold, cfg.T, cfg.K, 3));
      std::vector<double> mass(3, 0.0);
      for (const auto& s : gold) mass[static_cast<std::size_t>(s.label)] += s.duration;
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(mass[c] / cfg.T, cfg.proportions[c], 0.03);
    }
  }
}

TEST(Imbalanced, EmissionsFavourTheGoldLabel) {
  ImbalancedConfig cfg;
  cfg.T = 500;
  cfg.active_gain = 1.0;
  cfg.noise = 0.4;
  const auto data = generate_imbalanced(cfg, 3);
  for (const auto& s : data.gold[0]) {
    for (int t = s.start; t < s.end(); ++t) {
      for (int c = 0; c < 3; ++c) {
        if (c != s.label) EXPECT_GT(data.emissions.scores(0, t, s.label), data.emissions.scores(0, t, c));
      }
    }
  }
}

TEST(Imbalanced, SingleLabelAndDeterminism) {
  ImbalancedConfig one;
  one.proportions = {1.0};
  one.T = 300;
  const auto data = generate_imbalanced(one, 4);
  for (const auto& s : data.gold[0]) EXPECT_EQ(s.label, 0);
  EXPECT_NO_THROW(validate_segmentation(data.gold[0], 300, one.K, 1));

  ImbalancedConfig cfg;
  std::ostringstream x, y;
  write_emissions_csv(x, generate_imbalanced(cfg, 8).emissions);
  write_emissions_csv(y, generate_imbalanced(cfg, 8).emissions);
  EXPECT_EQ(x.str(), y.str());
}

TEST(Imbalanced, RejectsInvalidProportions) {
  ImbalancedConfig cfg;
  cfg.proportions = {0.5, 0.4};
  EXPECT_THROW(generate_imbalanced(cfg, 1), InputError);
  cfg.proportions = {1.2, -0.2};
  EXPECT_THROW(generate_imbalanced(cfg, 1), InputError);
  cfg.proportions = {};
  EXPECT_THROW(generate_imbalanced(cfg, 1), InputError);
}

TEST(Ablation, BaselineFollowsPrevalence) {
  AblationConfig cfg;
  cfg.data.active_gain = 1.0;
  const CenteringMode modes[] = {CenteringMode::None, CenteringMode::Mean};
  const auto r = centering_ablation(cfg, modes, 2);
  ASSERT_EQ(r.nu.size(), 3U);
  EXPECT_GT(r.nu[0], r.nu[1]);
  EXPECT_GT(r.nu[1], r.nu[2]);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(r.penalty[c][0], -r.nu[c] * 10);
    EXPECT_DOUBLE_EQ(r.penalty[c][2], -r.nu[c] * 50);
  }
  EXPECT_EQ(r.modes.size(), 2U);
  EXPECT_THROW(r.at(CenteringMode::SharedMax), ContractViolation);
}

TEST(PeakRatio, CenteringRemovesDrift) {
  const double none = cumulative_peak_ratio(5000, 3, 2.0, CenteringMode::None, 1);
  const double mean = cumulative_peak_ratio(5000, 3, 2.0, CenteringMode::Mean, 1);
  EXPECT_GT(none, 100.0);  // drift 2 T / sqrt(T) ~ 141
  EXPECT_LT(mean, 5.0);
}

TEST(SymbolTask, ShapesAndDeterminism) {
  const auto a = generate_symbol_task(3, 50, 4, 6, 0.8, 12);
  const auto b = generate_symbol_task(3, 50, 4, 6, 0.8, 12);
  ASSERT_EQ(a.symbols.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.symbols[i], b.symbols[i]);
    EXPECT_EQ(a.gold[i], b.gold[i]);
    EXPECT_EQ(a.symbols[i].size(), 50U);
    EXPECT_NO_THROW(validate_segmentation(a.gold[i], 50, 6, 4));
  }
}
