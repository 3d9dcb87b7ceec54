#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadiff {

/// Error raised by every module on contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}
}  // namespace detail

/// Dense row-major array of doubles. Network code only uses rank-2 tensors
/// (rows = batch); checkpoints accept any rank.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape{rows, cols}, data(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw Error("Tensor: dimensions must be positive");
  }

  Tensor(std::vector<std::size_t> shp, std::vector<double> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (shape.empty()) throw Error("Tensor: empty shape");
    std::size_t n = 1;
    for (auto d : shape) {
      if (d == 0) throw Error("Tensor: dimensions must be positive");
      n *= d;
    }
    if (n != data.size())
      throw Error(detail::concat("Tensor: shape product ", n, " != data length ", data.size()));
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  static Tensor row(std::span<const double> v) {
    return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
  }

  static Tensor column(std::span<const double> v) {
    return Tensor({v.size(), 1}, std::vector<double>(v.begin(), v.end()));
  }

  static Tensor zeros_like(const Tensor& t) {
    Tensor z;
    z.shape = t.shape;
    z.data.assign(t.data.size(), 0.0);
    return z;
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : data.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double item() const {
    if (data.size() != 1) throw Error(detail::concat("Tensor::item on tensor of size ", data.size()));
    return data[0];
  }

  std::span<const double> row_span(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }
  std::span<double> row_span(std::size_t r) { return {data.data() + r * cols(), cols()}; }

  bool all_finite() const {
    // x - x is 0 for finite x and NaN otherwise; four lanes keep it vectorizable.
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= data.size(); i += 4)
      for (std::size_t k = 0; k < 4; ++k) acc[k] += data[i + k] - data[i + k];
    for (; i < data.size(); ++i) acc[0] += data[i] - data[i];
    return acc[0] + acc[1] + acc[2] + acc[3] == 0.0;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
  }
};

/// Stacks equal-length vectors as rows of a matrix.
inline Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("stack_rows: no rows");
  Tensor t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw Error("stack_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row_span(r).begin());
  }
  return t;
}

inline std::vector<double> row_vector(const Tensor& t, std::size_t r) {
  auto s = t.row_span(r);
  return {s.begin(), s.end()};
}

}  // namespace cadiff
