#include "tsseg/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

namespace tsseg::kernels {
namespace {

void check(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

using Index = std::int64_t;

constexpr std::size_t kTile = 16;
constexpr std::size_t kRows = 8;

// C[r][j] = sum_p A(r, p) * B[p * n + j] for R consecutive output rows,
// where A(r, p) = a[r * a_row + p * a_col]. Every element is accumulated in
// p order, so blocking does not change the rounding. Output tiles live in a
// local buffer the compiler can keep in registers.
template <std::size_t R>
void rows_times_matrix(const Real* __restrict a, std::size_t a_row, std::size_t a_col, std::size_t k,
                       const Real* __restrict b, std::size_t n, Real* __restrict c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
    const std::size_t width = std::min(kTile, n - j0);
    Real acc[R][kTile] = {};
    if (width == kTile) {
      for (std::size_t p = 0; p < k; ++p) {
        const Real* brow = b + p * n + j0;
        for (std::size_t r = 0; r < R; ++r) {
          const Real av = a[r * a_row + p * a_col];
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) acc[r][j] += av * brow[j];
        }
      }
    } else {
      for (std::size_t p = 0; p < k; ++p) {
        const Real* brow = b + p * n + j0;
        for (std::size_t r = 0; r < R; ++r) {
          const Real av = a[r * a_row + p * a_col];
          for (std::size_t j = 0; j < width; ++j) acc[r][j] += av * brow[j];
        }
      }
    }
    for (std::size_t r = 0; r < R; ++r) std::copy_n(acc[r], width, c + r * n + j0);
  }
}

// Row-blocked product over all m output rows.
void blocked_product(const Real* a, std::size_t a_row, std::size_t a_col, std::size_t m, std::size_t k,
                     const Real* b, std::size_t n, Real* c) {
  const Index blocks = static_cast<Index>((m + kRows - 1) / kRows);
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const std::size_t i = static_cast<std::size_t>(blk) * kRows;
    const Real* ai = a + i * a_row;
    Real* ci = c + i * n;
    switch (std::min(kRows, m - i)) {
      case 8: rows_times_matrix<8>(ai, a_row, a_col, k, b, n, ci); break;
      case 7: rows_times_matrix<7>(ai, a_row, a_col, k, b, n, ci); break;
      case 6: rows_times_matrix<6>(ai, a_row, a_col, k, b, n, ci); break;
      case 5: rows_times_matrix<5>(ai, a_row, a_col, k, b, n, ci); break;
      case 4: rows_times_matrix<4>(ai, a_row, a_col, k, b, n, ci); break;
      case 3: rows_times_matrix<3>(ai, a_row, a_col, k, b, n, ci); break;
      case 2: rows_times_matrix<2>(ai, a_row, a_col, k, b, n, ci); break;
      default: rows_times_matrix<1>(ai, a_row, a_col, k, b, n, ci); break;
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check(a.cols() == b.rows(), "matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  blocked_product(a.data(), k, 1, m, k, b.data(), n, c.data());
  require_finite(c, "matmul");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check(a.rows() == b.rows(), "matmul_tn", a, b);
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Matrix c(m, n);
  blocked_product(a.data(), 1, m, m, k, b.data(), n, c.data());
  require_finite(c, "matmul_tn");
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check(a.cols() == b.cols(), "matmul_nt", a, b);
  // Same k-order accumulation as a row dot product, but the inner loop runs
  // over contiguous output columns.
  const Matrix bt = transpose(b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  blocked_product(a.data(), k, 1, m, k, bt.data(), n, c.data());
  require_finite(c, "matmul_nt");
  return c;
}

Matrix banded_matmul(const Matrix& a, std::size_t half_width, const Matrix& b) {
  check(a.rows() == a.cols() && a.cols() == b.rows(), "banded_matmul", a, b);
  const std::size_t t = a.rows(), n = b.cols();
  Matrix c(t, n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(t); ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    const std::size_t lo = ui > half_width ? ui - half_width : 0;
    const std::size_t hi = std::min(t - 1, ui + half_width);
    Real* crow = c.data() + ui * n;
    for (std::size_t p = lo; p <= hi; ++p) {
      const Real av = a(ui, p);
      const Real* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  require_finite(c, "banded_matmul");
  return c;
}

Matrix im2col3(const Matrix& x, std::size_t dilation) {
  const std::size_t t = x.rows(), f = x.cols();
  Matrix cols(t, 3 * f);
  const Index d = static_cast<Index>(dilation);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(t); ++i) {
    for (Index tap = 0; tap < 3; ++tap) {
      const Index src = i + (tap - 1) * d;
      if (src < 0 || src >= static_cast<Index>(t)) continue;
      std::copy_n(x.data() + src * f, f, cols.data() + i * 3 * f + tap * f);
    }
  }
  return cols;
}

Matrix col2im3(const Matrix& cols, std::size_t dilation) {
  if (cols.cols() % 3 != 0) throw ShapeError("col2im3: column count " + std::to_string(cols.cols()) + " not divisible by 3");
  const std::size_t t = cols.rows(), f = cols.cols() / 3;
  Matrix x(t, f);
  const Index d = static_cast<Index>(dilation);
  // Gather form: frame i receives tap k from frame i - (k - 1) d.
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(t); ++i) {
    Real* xrow = x.data() + i * f;
    for (Index tap = 0; tap < 3; ++tap) {
      const Index dst = i - (tap - 1) * d;
      if (dst < 0 || dst >= static_cast<Index>(t)) continue;
      const Real* crow = cols.data() + dst * 3 * f + tap * f;
      for (std::size_t j = 0; j < f; ++j) xrow[j] += crow[j];
    }
  }
  return x;
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols())
    throw ShapeError("add_row_bias: bias " + bias.shape() + " for matrix " + m.shape());
  const std::size_t n = m.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(m.rows()); ++i) {
    Real* row = m.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bias[j];
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += m(i, j);
  return s;
}

}  // namespace tsseg::kernels
