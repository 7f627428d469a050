// SPDX-License-Identifier: Apache-2.0
#include "vmclass/grid.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "vmclass/error.hpp"

namespace vmclass {

namespace {

std::size_t element_count(const std::vector<std::size_t> &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

} // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::Usage:
    return "E_USAGE";
  case ErrorCode::Io:
    return "E_IO";
  case ErrorCode::Schema:
    return "E_SCHEMA";
  case ErrorCode::Row:
    return "E_ROW";
  case ErrorCode::Data:
    return "E_DATA";
  case ErrorCode::Shape:
    return "E_SHAPE";
  case ErrorCode::State:
    return "E_STATE";
  }
  return "E_UNKNOWN";
}

NumericGrid::NumericGrid(std::vector<std::size_t> shape, double fill)
  : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

NumericGrid::NumericGrid(std::vector<std::size_t> shape,
                         std::vector<double> data)
  : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_))
    throw Error(ErrorCode::Shape, "grid data length " +
                                    std::to_string(data_.size()) +
                                    " does not match shape " +
                                    shape_string(shape_));
}

std::span<double> NumericGrid::row(std::size_t i) {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> NumericGrid::row(std::size_t i) const {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return std::span<const double>(data_).subspan(i * stride, stride);
}

void NumericGrid::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

std::string shape_string(const std::vector<std::size_t> &shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void require_shape(const NumericGrid &grid,
                   const std::vector<std::size_t> &expected,
                   std::string_view what) {
  if (grid.shape() != expected)
    throw Error(ErrorCode::Shape, std::string(what) + ": expected shape " +
                                    shape_string(expected) + ", got " +
                                    shape_string(grid.shape()));
}

} // namespace vmclass
