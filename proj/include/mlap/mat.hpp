#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mlap {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline void check_dim(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace mlap
