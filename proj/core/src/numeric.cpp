#include "streamcrf/numeric.hpp"

namespace streamcrf {

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), strides_(shape_.size(), 1) {
  std::size_t n = 1;
  for (std::size_t d = shape_.size(); d-- > 0;) {
    strides_[d] = n;
    n *= shape_[d];
  }
  data_.assign(n, fill);
}

}  // namespace streamcrf
