#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace streamcrf {

// Log-domain sentinel for "no path". Kept finite so gradients never see NaN.
inline constexpr double kNegInf = -1e9;
// Any logsumexp whose maximum falls below this is treated as -inf.
inline constexpr double kNegInfGuard = kNegInf + 1.0;

/// Invalid user-supplied data (shapes, non-finite values, malformed files).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition the caller was responsible for was broken.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A size guard refused the request (dense edge tensor, enumeration, ...).
class GuardExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool is_neg_inf(double x) { return x < kNegInfGuard; }

/// log(exp(a) + exp(b)) with the sentinel guard.
inline double log_add(double a, double b) {
  const double hi = std::max(a, b);
  if (hi < kNegInfGuard) return kNegInf;
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

inline double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi < kNegInfGuard) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

/// Dense row-major tensor of doubles. Indexing may address a prefix of the
/// dimensions, in which case the offset of the first trailing element is used.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape), fill) {}
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return shape_.at(i); }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<double> data() { return data_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] std::size_t bytes() const { return data_.size() * sizeof(double); }

  template <typename... Idx>
  [[nodiscard]] std::size_t offset(Idx... idx) const {
    static_assert(sizeof...(Idx) > 0);
    assert(sizeof...(Idx) <= shape_.size());
    const std::size_t ids[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t d = 0; d < sizeof...(Idx); ++d) {
      assert(ids[d] < shape_[d]);
      off += ids[d] * strides_[d];
    }
    return off;
  }

  template <typename... Idx>
  double& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  double operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  /// Contiguous view over the trailing dimensions after fixing a prefix.
  template <typename... Idx>
  [[nodiscard]] std::span<double> slice(Idx... idx) {
    return {data_.data() + offset(idx...), strides_[sizeof...(Idx) - 1]};
  }
  template <typename... Idx>
  [[nodiscard]] std::span<const double> slice(Idx... idx) const {
    return {data_.data() + offset(idx...), strides_[sizeof...(Idx) - 1]};
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

}  // namespace streamcrf
