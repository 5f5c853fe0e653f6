#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace allocsim {

// Dense row-major array with a fixed rank. The last index varies fastest, so
// row(i, j, ...) with Rank-1 indices is a contiguous span.
template <class T, std::size_t Rank>
class Tensor {
 public:
  using Dims = std::array<std::size_t, Rank>;

  Tensor() { dims_.fill(0); }

  explicit Tensor(const Dims& dims, T fill = T{}) : dims_(dims) {
    data_.assign(count(dims), fill);
  }

  const Dims& dims() const { return dims_; }
  std::size_t dim(std::size_t k) const { return dims_[k]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  template <class... I>
  T& operator()(I... idx) {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  template <class... I>
  const T& operator()(I... idx) const {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  template <class... I>
  std::span<T> row(I... idx) {
    static_assert(sizeof...(I) == Rank - 1);
    return {data_.data() + row_offset({static_cast<std::size_t>(idx)...}), dims_[Rank - 1]};
  }

  template <class... I>
  std::span<const T> row(I... idx) const {
    static_assert(sizeof...(I) == Rank - 1);
    return {data_.data() + row_offset({static_cast<std::size_t>(idx)...}), dims_[Rank - 1]};
  }

  std::vector<T>& flat() { return data_; }
  const std::vector<T>& flat() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Tensor& other) const = default;

 private:
  static std::size_t count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t offset(const std::array<std::size_t, Rank>& idx) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < Rank; ++k) {
      assert(idx[k] < dims_[k]);
      off = off * dims_[k] + idx[k];
    }
    return off;
  }

  std::size_t row_offset(const std::array<std::size_t, Rank - 1>& idx) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k + 1 < Rank; ++k) {
      assert(idx[k] < dims_[k]);
      off = off * dims_[k] + idx[k];
    }
    return off * dims_[Rank - 1];
  }

  Dims dims_;
  std::vector<T> data_;
};

using Table2 = Tensor<double, 2>;
using Table3 = Tensor<double, 3>;
using Table4 = Tensor<double, 4>;

}  // namespace allocsim
