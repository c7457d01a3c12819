#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Structural (boolean) matrices behind the banded-execution infeasibility
// argument: duration compatibility, boundary reachability, bandwidth under
// orderings and Reverse Cuthill-McKee.

namespace streamcrf {

/// n x n boolean matrix stored as bitset rows.
class BooleanMatrix {
 public:
  explicit BooleanMatrix(int n = 0);

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] bool get(int i, int j) const {
    return (rows_[row_offset(i) + static_cast<std::size_t>(j) / 64] >> (j % 64)) & 1U;
  }
  void set(int i, int j, bool value = true);

  [[nodiscard]] std::size_t nonzeros() const;
  [[nodiscard]] BooleanMatrix transpose() const;
  [[nodiscard]] BooleanMatrix symmetrized() const;  // M or M^T
  /// Boolean semiring product.
  [[nodiscard]] BooleanMatrix operator*(const BooleanMatrix& other) const;
  friend bool operator==(const BooleanMatrix&, const BooleanMatrix&) = default;

 private:
  [[nodiscard]] std::size_t row_offset(int i) const { return static_cast<std::size_t>(i) * words_; }

  int n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> rows_;
};

/// States (d, y), d in 1..min(K, S), flattened duration-major as
/// (d - 1) * C + y; entry set iff d1 + d2 <= S.
BooleanMatrix duration_compat_matrix(int S, int K, int C);

/// Boundaries 0..T; B[i][j] set iff 1 <= j - i <= K.
BooleanMatrix boundary_reachability(int T, int K);

BooleanMatrix boolean_power(const BooleanMatrix& m, int power);

/// max |i - j| over nonzeros; 0 when empty.
int bandwidth(const BooleanMatrix& m);

/// Bandwidth after relabelling: order[p] is the original index placed at p.
int bandwidth(const BooleanMatrix& m, std::span<const int> order);

/// C * floor(S / 2) - 1, the size of the mutually compatible short-duration
/// clique minus one. Only meaningful for S <= 2K.
int clique_lower_bound(int S, int C);

/// bandwidth(B^m) for the boundary reachability matrix.
int boolean_power_bandwidth(int T, int K, int m);

/// Reverse Cuthill-McKee on the pattern of M or M^T. Each component starts
/// at its minimum-degree vertex (ties by index); components are visited in
/// that order and the concatenated order is reversed.
std::vector<int> rcm_order(const BooleanMatrix& m);

struct BandwidthRow {
  int S = 0;
  int K = 0;
  int C = 0;
  int n = 0;
  std::string ordering;
  int bw = 0;
  double ratio = 0.0;  // bw / (n - 1), 0 when n <= 1 or empty
  std::string span_class;
};

/// "small" for S <= K/2, "moderate" for K/2 < S < K, "large" for S >= K.
std::string span_class(int S, int K);

/// Identity and RCM rows for every S.
std::vector<BandwidthRow> rcm_bandwidth_report(std::span<const int> spans, int K, int C);

std::string bandwidth_report_csv(const std::vector<BandwidthRow>& rows);

}  // namespace streamcrf
