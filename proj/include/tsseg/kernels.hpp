#pragma once

#include <cstddef>

#include "tsseg/matrix.hpp"

// OpenMP-parallel dense kernels. Each output entry is accumulated in the same
// order as the serial versions in reference.hpp, so results are bitwise
// identical to the reference regardless of thread count.
namespace tsseg::kernels {

/// a (m x k) * b (k x n).
Matrix matmul(const Matrix& a, const Matrix& b);

/// transpose(a) * b, with a (k x m) and b (k x n).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// a * transpose(b), with a (m x k) and b (n x k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a * b for a square `a` whose entries vanish when |i - j| > half_width.
/// Equal bit-for-bit to matmul(a, b) on such inputs.
Matrix banded_matmul(const Matrix& a, std::size_t half_width, const Matrix& b);

/// Gathers the three taps (t - dilation, t, t + dilation) of every frame into
/// one row: result is T x 3F, zero where a tap falls outside [0, T).
Matrix im2col3(const Matrix& x, std::size_t dilation);

/// Adjoint of im2col3: scatters a T x 3F column matrix back onto T x F frames.
Matrix col2im3(const Matrix& cols, std::size_t dilation);

/// Adds a 1 x n bias row to every row of m.
void add_row_bias(Matrix& m, const Matrix& bias);

/// Column sums as a 1 x n matrix (bias gradient).
Matrix column_sums(const Matrix& m);

}  // namespace tsseg::kernels
