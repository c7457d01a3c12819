#include "streamcrf/banded.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "streamcrf/io.hpp"
#include "streamcrf/numeric.hpp"

namespace streamcrf {

BooleanMatrix::BooleanMatrix(int n)
    : n_(n), words_((static_cast<std::size_t>(n) + 63) / 64), rows_(static_cast<std::size_t>(n) * words_, 0) {
  if (n < 0) throw ContractViolation("matrix dimension must be >= 0");
}

void BooleanMatrix::set(int i, int j, bool value) {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) throw ContractViolation("matrix index out of range");
  const std::uint64_t bit = std::uint64_t{1} << (j % 64);
  auto& w = rows_[row_offset(i) + static_cast<std::size_t>(j) / 64];
  w = value ? (w | bit) : (w & ~bit);
}

std::size_t BooleanMatrix::nonzeros() const {
  std::size_t n = 0;
  for (auto w : rows_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

BooleanMatrix BooleanMatrix::transpose() const {
  BooleanMatrix t(n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (get(i, j)) t.set(j, i);
    }
  }
  return t;
}

BooleanMatrix BooleanMatrix::symmetrized() const {
  BooleanMatrix s = transpose();
  for (std::size_t w = 0; w < rows_.size(); ++w) s.rows_[w] |= rows_[w];
  return s;
}

BooleanMatrix BooleanMatrix::operator*(const BooleanMatrix& o) const {
  if (o.n_ != n_) throw ContractViolation("boolean product needs equal dimensions");
  BooleanMatrix out(n_);
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < n_; ++k) {
      if (!get(i, k)) continue;
      for (std::size_t w = 0; w < words_; ++w) out.rows_[out.row_offset(i) + w] |= o.rows_[o.row_offset(k) + w];
    }
  }
  return out;
}

BooleanMatrix duration_compat_matrix(int S, int K, int C) {
  if (S < 1 || K < 1 || C < 1) throw InputError("S, K and C must be >= 1");
  const int D = std::min(K, S);
  BooleanMatrix m(D * C);
  for (int d1 = 1; d1 <= D; ++d1) {
    for (int d2 = 1; d1 + d2 <= S && d2 <= D; ++d2) {
      for (int y1 = 0; y1 < C; ++y1) {
        for (int y2 = 0; y2 < C; ++y2) m.set((d1 - 1) * C + y1, (d2 - 1) * C + y2);
      }
    }
  }
  return m;
}

BooleanMatrix boundary_reachability(int T, int K) {
  if (T < 1 || K < 1) throw InputError("T and K must be >= 1");
  BooleanMatrix m(T + 1);
  for (int i = 0; i <= T; ++i) {
    for (int j = i + 1; j <= std::min(T, i + K); ++j) m.set(i, j);
  }
  return m;
}

BooleanMatrix boolean_power(const BooleanMatrix& m, int power) {
  if (power < 1) throw InputError("matrix power must be >= 1");
  BooleanMatrix out = m;
  for (int p = 1; p < power; ++p) out = out * m;
  return out;
}

int bandwidth(const BooleanMatrix& m) {
  std::vector<int> id(static_cast<std::size_t>(m.size()));
  std::iota(id.begin(), id.end(), 0);
  return bandwidth(m, id);
}

int bandwidth(const BooleanMatrix& m, std::span<const int> order) {
  const int n = m.size();
  if (order.size() != static_cast<std::size_t>(n)) throw ContractViolation("ordering has the wrong length");
  std::vector<int> pos(static_cast<std::size_t>(n), -1);
  for (int p = 0; p < n; ++p) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = p;
  int bw = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (m.get(i, j)) bw = std::max(bw, std::abs(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]));
    }
  }
  return bw;
}

int clique_lower_bound(int S, int C) {
  if (S < 1 || C < 1) throw InputError("S and C must be >= 1");
  return C * (S / 2) - 1;
}

int boolean_power_bandwidth(int T, int K, int m) {
  return bandwidth(boolean_power(boundary_reachability(T, K), m));
}

std::vector<int> rcm_order(const BooleanMatrix& m) {
  const BooleanMatrix g = m.symmetrized();
  const int n = g.size();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && g.get(i, j)) adj[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  auto degree = [&](int v) { return adj[static_cast<std::size_t>(v)].size(); };
  auto by_degree = [&](int a, int b) {
    return degree(a) != degree(b) ? degree(a) < degree(b) : a < b;
  };
  std::vector<int> order;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> starts(static_cast<std::size_t>(n));
  std::iota(starts.begin(), starts.end(), 0);
  std::stable_sort(starts.begin(), starts.end(), by_degree);
  for (int s : starts) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    seen[static_cast<std::size_t>(s)] = 1;
    std::size_t head = order.size();
    order.push_back(s);
    for (; head < order.size(); ++head) {
      std::vector<int> next;
      for (int v : adj[static_cast<std::size_t>(order[head])]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          next.push_back(v);
        }
      }
      std::sort(next.begin(), next.end(), by_degree);
      order.insert(order.end(), next.begin(), next.end());
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

std::string span_class(int S, int K) {
  if (2 * S <= K) return "small";
  if (S < K) return "moderate";
  return "large";
}

std::vector<BandwidthRow> rcm_bandwidth_report(std::span<const int> spans, int K, int C) {
  std::vector<BandwidthRow> rows;
  for (int S : spans) {
    const BooleanMatrix m = duration_compat_matrix(S, K, C);
    const int n = m.size();
    std::vector<int> id(static_cast<std::size_t>(n));
    std::iota(id.begin(), id.end(), 0);
    const std::vector<int> rcm = rcm_order(m);
    const std::pair<const char*, const std::vector<int>*> orderings[] = {{"identity", &id},
                                                                          {"rcm", &rcm}};
    for (const auto& [name, order] : orderings) {
      BandwidthRow r{S, K, C, n, name, bandwidth(m, *order), 0.0, span_class(S, K)};
      if (n > 1 && m.nonzeros() > 0) r.ratio = static_cast<double>(r.bw) / (n - 1);
      rows.push_back(r);
    }
  }
  return rows;
}

std::string bandwidth_report_csv(const std::vector<BandwidthRow>& rows) {
  std::ostringstream os;
  os << kCsvHeader << '\n' << "S,K,C,n,ordering,bw,ratio,span_class\n";
  for (const auto& r : rows) {
    os << r.S << ',' << r.K << ',' << r.C << ',' << r.n << ',' << r.ordering << ',' << r.bw << ','
       << r.ratio << ',' << r.span_class << '\n';
  }
  return os.str();
}

}  // namespace streamcrf
