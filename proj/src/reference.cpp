#include "tsseg/reference.hpp"

#include <cstdint>
#include <string>

namespace tsseg::reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: incompatible shapes " + a.shape() + " and " + b.shape());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Real s = 0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: incompatible shapes " + a.shape() + " and " + b.shape());
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Real s = 0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: incompatible shapes " + a.shape() + " and " + b.shape());
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      Real s = 0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
  return c;
}

Matrix banded_matmul(const Matrix& a, std::size_t half_width, const Matrix& b) {
  if (a.rows() != a.cols() || a.cols() != b.rows())
    throw ShapeError("banded_matmul: incompatible shapes " + a.shape() + " and " + b.shape());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Real s = 0;
      for (std::size_t p = 0; p < a.cols(); ++p) {
        const std::size_t dist = p > i ? p - i : i - p;
        if (dist <= half_width) s += a(i, p) * b(p, j);
      }
      c(i, j) = s;
    }
  return c;
}

Matrix dilated_conv3(const Matrix& x, const Matrix& weights, const Matrix& bias,
                     std::size_t dilation) {
  const std::size_t t = x.rows(), f = x.cols(), g = weights.cols();
  if (weights.rows() != 3 * f || bias.rows() != 1 || bias.cols() != g)
    throw ShapeError("dilated_conv3: weights " + weights.shape() + ", bias " + bias.shape() +
                     " for input " + x.shape());
  Matrix y(t, g);
  const auto d = static_cast<std::int64_t>(dilation);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t o = 0; o < g; ++o) {
      Real s = bias(0, o);
      for (std::int64_t tap = 0; tap < 3; ++tap) {
        const std::int64_t src = static_cast<std::int64_t>(i) + (tap - 1) * d;
        if (src < 0 || src >= static_cast<std::int64_t>(t)) continue;
        for (std::size_t c = 0; c < f; ++c)
          s += x(static_cast<std::size_t>(src), c) * weights(static_cast<std::size_t>(tap) * f + c, o);
      }
      y(i, o) = s;
    }
  return y;
}

}  // namespace tsseg::reference
