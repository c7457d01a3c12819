#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "streamcrf/banded.hpp"
#include "support.hpp"

using namespace streamcrf;

namespace {

// Minimum bandwidth over all n! orderings.
int exhaustive_min_bandwidth(const BooleanMatrix& m) {
  std::vector<int> order(static_cast<std::size_t>(m.size()));
  std::iota(order.begin(), order.end(), 0);
  int best = m.size();
  do {
    best = std::min(best, bandwidth(m, order));
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

bool is_permutation_of_n(std::vector<int> order, int n) {
  std::sort(order.begin(), order.end());
  for (int i = 0; i < n; ++i) {
    if (order[static_cast<std::size_t>(i)] != i) return false;
  }
  return static_cast<int>(order.size()) == n;
}

}  // namespace

TEST(BooleanMatrix, ProductTransposeAndCounting) {
  BooleanMatrix a(70), b(70);
  a.set(0, 65);
  a.set(3, 3);
  b.set(65, 2);
  b.set(3, 69);
  const auto p = a * b;
  EXPECT_TRUE(p.get(0, 2));
  EXPECT_TRUE(p.get(3, 69));
  EXPECT_EQ(p.nonzeros(), 2U);
  EXPECT_TRUE(a.transpose().get(65, 0));
  const auto s = a.symmetrized();
  EXPECT_TRUE(s.get(65, 0) && s.get(0, 65));
  EXPECT_EQ(s.nonzeros(), 3U);
}

TEST(CompatMatrix, PatternFollowsDurationSum) {
  for (int S = 1; S <= 10; ++S) {
    for (int K = 1; K <= 5; ++K) {
      for (int C = 1; C <= 3; ++C) {
        const auto m = duration_compat_matrix(S, K, C);
        const int D = std::min(K, S);
        ASSERT_EQ(m.size(), D * C);
        for (int i = 0; i < D * C; ++i) {
          for (int j = 0; j < D * C; ++j) EXPECT_EQ(m.get(i, j), (i / C + 1) + (j / C + 1) <= S);
        }
      }
    }
  }
}

TEST(CompatMatrix, Examples) {
  const auto dense = duration_compat_matrix(8, 4, 3);
  EXPECT_EQ(dense.nonzeros(), 144U);
  EXPECT_EQ(duration_compat_matrix(1, 5, 3).nonzeros(), 0U);
  const auto single = duration_compat_matrix(2, 2, 1);
  EXPECT_EQ(single.nonzeros(), 1U);
  EXPECT_TRUE(single.get(0, 0));
}

TEST(Bandwidth, Examples) {
  BooleanMatrix identity(6);
  for (int i = 0; i < 6; ++i) identity.set(i, i);
  EXPECT_EQ(bandwidth(identity), 0);
  BooleanMatrix full(5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) full.set(i, j);
  }
  EXPECT_EQ(bandwidth(full), 4);
  EXPECT_EQ(bandwidth(boundary_reachability(10, 2)), 2);
  EXPECT_EQ(bandwidth(BooleanMatrix(4)), 0);
}

TEST(Bandwidth, ReorderingUsesPlacement) {
  BooleanMatrix m(4);
  m.set(0, 1);
  const std::vector<int> order{0, 2, 3, 1};
  EXPECT_EQ(bandwidth(m, order), 3);
}

TEST(Clique, FormulaExamples) {
  EXPECT_EQ(clique_lower_bound(4, 3), 5);
  EXPECT_EQ(clique_lower_bound(2, 1), 0);
  EXPECT_EQ(clique_lower_bound(5, 2), 3);
}

TEST(Clique, ExhaustiveSearchRespectsBound) {
  for (int K = 1; K <= 4; ++K) {
    for (int C = 1; C <= 3; ++C) {
      for (int S = 2; S <= 2 * K + 1; ++S) {
        const auto m = duration_compat_matrix(S, K, C);
        if (m.size() > 8) continue;
        EXPECT_GE(exhaustive_min_bandwidth(m.symmetrized()), clique_lower_bound(S, C))
            << "S " << S << " K " << K << " C " << C;
      }
    }
  }
}

TEST(BooleanPower, Examples) {
  EXPECT_EQ(boolean_power_bandwidth(10, 2, 3), 6);
  EXPECT_EQ(boolean_power_bandwidth(10, 3, 5), 10);
  for (int K = 1; K <= 5; ++K) EXPECT_EQ(boolean_power_bandwidth(12, K, 1), K);
}

TEST(BooleanPower, CellPattern) {
  for (int T = 1; T <= 14; ++T) {
    for (int K = 1; K <= 4; ++K) {
      const auto b = boundary_reachability(T, K);
      ASSERT_EQ(b.size(), T + 1);
      for (int m = 1; m <= 5; ++m) {
        const auto p = boolean_power(b, m);
        for (int i = 0; i <= T; ++i) {
          for (int j = 0; j <= T; ++j) EXPECT_EQ(p.get(i, j), j - i >= m && j - i <= m * K);
        }
      }
    }
  }
}

TEST(BooleanPower, LemmaOnSmallGrid) {
  for (int T = 1; T <= 24; ++T) {
    for (int K = 1; K <= 4; ++K) {
      for (int m = 1; m <= std::min(T, 6); ++m) EXPECT_EQ(boolean_power_bandwidth(T, K, m), std::min(T, m * K));
    }
  }
}

TEST(Rcm, PathGraphRecoversUnitBandwidth) {
  // A path 0-1-...-9 relabelled by a fixed shuffle.
  const std::vector<int> label{7, 2, 9, 0, 4, 8, 1, 5, 3, 6};
  BooleanMatrix m(10);
  for (int i = 0; i + 1 < 10; ++i) m.set(label[static_cast<std::size_t>(i)], label[static_cast<std::size_t>(i + 1)]);
  EXPECT_GT(bandwidth(m.symmetrized()), 1);
  const auto order = rcm_order(m);
  EXPECT_TRUE(is_permutation_of_n(order, 10));
  EXPECT_EQ(bandwidth(m.symmetrized(), order), 1);
}

TEST(Rcm, DisconnectedComponentsAreConcatenated) {
  BooleanMatrix m(7);
  m.set(0, 3);
  m.set(3, 5);
  m.set(1, 6);
  const auto order = rcm_order(m);
  EXPECT_TRUE(is_permutation_of_n(order, 7));
  EXPECT_LE(bandwidth(m.symmetrized(), order), 1);
}

TEST(Rcm, NeverBeatsCliqueBound) {
  for (int K = 4; K <= 8; ++K) {
    for (int C = 2; C <= 4; ++C) {
      for (int S = 2; S <= 2 * K + 1; ++S) {
        const auto m = duration_compat_matrix(S, K, C);
        EXPECT_GE(bandwidth(m.symmetrized(), rcm_order(m)), clique_lower_bound(S, C));
      }
    }
  }
}

TEST(Report, RowsAndClasses) {
  EXPECT_EQ(span_class(2, 4), "small");
  EXPECT_EQ(span_class(3, 4), "moderate");
  EXPECT_EQ(span_class(4, 4), "large");
  EXPECT_EQ(span_class(9, 4), "large");
  const std::vector<int> spans{1, 4, 8};
  const auto rows = rcm_bandwidth_report(spans, 4, 2);
  ASSERT_EQ(rows.size(), 6U);
  EXPECT_EQ(rows[0].ratio, 0.0);  // S = 1 is empty
  for (const auto& r : rows) {
    if (r.S == 8) EXPECT_EQ(r.ratio, 1.0);
    EXPECT_TRUE(r.ordering == "identity" || r.ordering == "rcm");
  }
  const auto csv = bandwidth_report_csv(rows);
  EXPECT_NE(csv.find("S,K,C,n,ordering,bw,ratio,span_class"), std::string::npos);
  EXPECT_EQ(csv.rfind("# streamcrf-csv v1", 0), 0U);
}
