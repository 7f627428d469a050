// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vmclass {

/// Dense row-major array of doubles with an explicit shape.
class NumericGrid {
public:
  NumericGrid() = default;
  explicit NumericGrid(std::vector<std::size_t> shape, double fill = 0.0);
  NumericGrid(std::vector<std::size_t> shape, std::vector<double> data);

  static NumericGrid zeros_like(const NumericGrid &other) {
    return NumericGrid(other.shape_);
  }

  const std::vector<std::size_t> &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double &operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double &at(std::size_t i, std::size_t j) noexcept {
    return data_[i * shape_[1] + j];
  }
  double at(std::size_t i, std::size_t j) const noexcept {
    return data_[i * shape_[1] + j];
  }
  double &at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Contiguous view of row `i` along the leading axis.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  void fill(double value);
  bool same_shape(const NumericGrid &other) const noexcept {
    return shape_ == other.shape_;
  }

  friend bool operator==(const NumericGrid &, const NumericGrid &) = default;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t> &shape);

/// Throws a Shape error unless `grid` has exactly `expected` shape.
void require_shape(const NumericGrid &grid,
                   const std::vector<std::size_t> &expected,
                   std::string_view what);

} // namespace vmclass
